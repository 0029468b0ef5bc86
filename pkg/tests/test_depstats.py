import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tapestats.depstats import (
    REFERENCE_BASELINE_VARIANCE, Contingency, contingency, dependence_statistics,
    dloglog_fit, thresholds, variance_slices,
)


def table(counts) -> Contingency:
    joint = np.asarray(counts, dtype=np.int64)
    return Contingency(tuple(range(joint.shape[0])), tuple(range(joint.shape[1])), joint, int(joint.sum()))


def test_thresholds_reported_values():
    eps_l, eps_i = thresholds(1866, 64, 7945289)
    assert round(eps_l, 2) == 0.14
    assert round(eps_i, 2) == 0.49
    assert eps_l == pytest.approx(0.1444, abs=5e-5)
    assert eps_i == pytest.approx(0.4931, abs=5e-5)


def test_exact_product_table_is_independent():
    # outer product of integer marginals (2, 3, 5) x (1, 4)
    r = dependence_statistics(table(np.outer([2, 3, 5], [1, 4])))
    assert r.L == pytest.approx(0.0, abs=1e-15)
    assert r.I == pytest.approx(0.0, abs=1e-15)
    assert r.chi2 == pytest.approx(0.0, abs=1e-15)
    assert not r.reject_L and not r.reject_I


def test_perfect_dependence_two_symbols():
    pairs = [(0, 0)] * 5000 + [(1, 1)] * 5000
    r = dependence_statistics(pairs)
    assert r.L == pytest.approx(1.0, abs=1e-14)
    assert r.I == pytest.approx(2 * math.log(2), abs=1e-14)
    # chi2 over four cells of (1/4)^2 / (1/4) each
    assert r.chi2 == pytest.approx(1.0, abs=1e-14)
    assert r.m_ab == 2 and r.m_a == 2 and r.m_b == 2


def test_marginals_and_support():
    ct = contingency([(0, 1), (0, 2), (3, 1), (3, 1), (7, 5)])
    assert ct.nu_a.sum() == pytest.approx(1, abs=1e-12)
    assert ct.nu_b.sum() == pytest.approx(1, abs=1e-12)
    assert ct.nu_ab.sum() == pytest.approx(1, abs=1e-12)
    assert ct.m_ab <= ct.m_a * ct.m_b
    assert (ct.m_a, ct.m_b, ct.m_ab, ct.n) == (3, 3, 4, 5)


def test_l_counts_unobserved_cells():
    # (0,0), (1,1): the off-diagonal cells are unobserved but have product mass
    r = dependence_statistics([(0, 0), (1, 1)])
    assert r.L == pytest.approx(4 * 0.25, abs=1e-15)


def test_too_few_pairs():
    with pytest.raises(ValueError):
        dependence_statistics([(0, 0)])


pair_lists = st.lists(st.tuples(st.integers(0, 4), st.integers(-3, 3)), min_size=2, max_size=80)


@settings(max_examples=200, deadline=None)
@given(pair_lists, st.permutations(range(5)), st.permutations(range(-3, 4)))
def test_relabel_and_duplicate_invariance(pairs, pa, pb):
    r = dependence_statistics(pairs)
    assert 0 <= r.L <= 2 + 1e-12
    assert r.I >= 0 and r.chi2 >= 0
    assert r.eps_L > 0 and r.eps_I > 0
    relabeled = dependence_statistics([(pa[a], pb[b + 3]) for a, b in pairs])
    doubled = dependence_statistics(pairs + pairs)
    for other in (relabeled, doubled):
        assert other.L == pytest.approx(r.L, abs=1e-12)
        assert other.I == pytest.approx(r.I, abs=1e-12)
        assert other.chi2 == pytest.approx(r.chi2, abs=1e-12)
        assert (other.m_a, other.m_b) == (r.m_a, r.m_b)


def test_independent_data_rarely_rejected():
    rng = np.random.default_rng(5)
    pa = np.array([0.4, 0.3, 0.2, 0.1])
    pb = np.array([0.1, 0.2, 0.4, 0.2, 0.1])
    n = 10 ** 5
    rejected = 0
    for _ in range(200):
        a = rng.choice(4, size=n, p=pa)
        b = rng.choice(5, size=n, p=pb)
        joint = np.zeros((4, 5), dtype=np.int64)
        np.add.at(joint, (a, b), 1)
        rejected += dependence_statistics(table(joint)).reject_L
    assert rejected < 100


def test_slice_of_three_symbols():
    vs = variance_slices([(0, -1), (0, 0), (0, 1)], baseline_a=None)
    assert list(vs.slices) == [0]
    assert vs.slices[0].variance == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("k", [1, 2, 5, 40])
def test_slice_variance_of_repeated_symbols(k):
    # unbiased variance of k copies each of -1, 0, 1 is 2k / (3k - 1)
    pairs = [(0, b) for b in (-1, 0, 1)] * k
    vs = variance_slices(pairs)
    assert vs.baseline.variance == pytest.approx(2 * k / (3 * k - 1), rel=1e-14)


def test_min_size_rule():
    pairs = [(0, 1), (0, 2), (0, 4), (1, 5), (2, 1), (2, 2)]
    vs = variance_slices(pairs)
    assert list(vs.slices) == [0]
    assert vs.skipped_pairs == 3
    assert sum(s.n for s in vs.slices.values()) + vs.skipped_pairs == vs.total_pairs


def test_empty_pairs():
    with pytest.raises(ValueError):
        variance_slices([])


def test_generator_curve_recovered():
    rng = np.random.default_rng(8)
    per_slice = 400
    pairs = []
    for a in range(0, 101):
        sd = math.sqrt(0.33 * math.sqrt(1 + a))
        pairs.extend((a, float(b)) for b in rng.normal(0.0, sd, size=per_slice))
    vs = variance_slices(pairs, width=10, min_size=3)
    assert len(vs.intervals) == 10
    for iv in vs.intervals:
        sig2 = np.array([0.33 * math.sqrt(1 + a) for a in range(iv.a_left, iv.a_right + 1)])
        # Var of a Gaussian sample variance is 2 sigma^4 / (n - 1)
        se = math.sqrt(np.sum(2 * sig2 ** 2 / (per_slice - 1))) / iv.slices
        assert abs(iv.variance_moments.mean - sig2.mean()) < 3 * se


def test_interval_grouping_skips_baseline_and_partial_tail():
    pairs = [(a, b) for a in range(0, 26) for b in (0, 1, 3)]
    vs = variance_slices(pairs, width=10)
    assert vs.baseline is not None
    assert [(iv.a_left, iv.a_right) for iv in vs.intervals] == [(1, 10), (11, 20)]


def test_dloglog_noiseless_round_trip():
    c, s, base = -1.01, 0.25, REFERENCE_BASELINE_VARIANCE
    pts = [(a, base * math.exp(math.exp(c) * a ** s)) for a in (5, 15, 25, 35, 55, 95, 150)]
    f = dloglog_fit(pts, base)
    assert f.fit.intercept == pytest.approx(c, abs=1e-6)
    assert f.fit.slope == pytest.approx(s, abs=1e-6)
    assert f.to_dict()["excluded"] == 0


def test_dloglog_excludes_points_below_baseline():
    base = 0.5
    pts = [(2, 0.4), (4, 0.5), (8, 0.7), (16, 0.9), (32, 1.3)]
    f = dloglog_fit(pts, base)
    assert len(f.excluded) == 2 and len(f.used) == 3
    with pytest.raises(ValueError):
        dloglog_fit(pts[:4], base)
    with pytest.raises(ValueError):
        dloglog_fit(pts, 0.0)
