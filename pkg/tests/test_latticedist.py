import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from tapestats.latticedist import (DEFAULT_B_RANGES, KumaParams, RankFrequency, fit_loglog, fit_waiting_two_step,
                                   hz_pmf, kuma_cdf, kuma_curve, kuma_moments, kuma_pdf, kuma_ppf, loglog_objective,
                                   weibull_moment_curve, weibull_moments, weibull_zero_skew_shape, zm_pmf)
from tapestats.moments import sample_moments
from tapestats.special import hurwitz_zeta


def test_zeta_brute_force():
    Q, S, n = 0.8908, 4.024, 10 ** 7
    head = float(np.sum((np.arange(n)[::-1] + Q) ** -S))  # smallest terms first
    # tail Σ_{i>=n} lies between the integrals from n and from n-1
    lo = (n + Q) ** (1 - S) / (S - 1)
    hi = (n - 1 + Q) ** (1 - S) / (S - 1)
    assert hi - lo < 1e-20
    assert hurwitz_zeta(Q, S) == pytest.approx(head + lo, rel=1e-9)


def test_hz_normalization():
    k = np.arange(0, 100_000)
    p = hz_pmf(k, 0.89, 4.0)
    tail = hurwitz_zeta(100_000 + 0.89, 4.0) / hurwitz_zeta(0.89, 4.0)
    assert math.fsum(p) + tail == pytest.approx(1.0, abs=1e-12)


def test_hz_domain():
    with pytest.raises(ValueError):
        hz_pmf(0, 1.0, 1.0)
    with pytest.raises(ValueError):
        hz_pmf(-1, 1.0, 2.0)


def test_zm_examples():
    assert zm_pmf(1, 0.5, 2.0, 1) == 1.0
    p = zm_pmf([1, 2, 3], 1.0, 1.0, 3)
    assert p == pytest.approx(np.array([1 / 2, 1 / 3, 1 / 4]) / (13 / 12), rel=1e-14)
    z = zm_pmf([1, 2, 3, 4], 1e-12, 2.0, 4)
    ref = np.array([1, 1 / 4, 1 / 9, 1 / 16])
    assert z == pytest.approx(ref / ref.sum(), rel=1e-9)
    with pytest.raises(ValueError):
        zm_pmf(5, 1.0, 1.0, 4)


@given(st.floats(0.05, 10), st.floats(1.05, 6))
def test_pmfs_strictly_decreasing(Q, S):
    k = np.arange(0, 60)
    assert np.all(np.diff(hz_pmf(k, Q, S)) < 0)
    assert np.all(np.diff(zm_pmf(k[1:], Q, S - 1, 59)) < 0)


def _exact_counts(Q, S, kmax, scale=1e13):
    k = np.arange(kmax + 1)
    return RankFrequency(tuple(int(x) for x in k), tuple(int(round(c)) for c in hz_pmf(k, Q, S) * scale))


@pytest.mark.parametrize("weighted", [False, True])
def test_fit_round_trip_exact_law(weighted):
    fit = fit_loglog(_exact_counts(2.0, 3.0, 50), weighted=weighted)
    assert fit.Q == pytest.approx(2.0, rel=1e-4) and fit.S == pytest.approx(3.0, rel=1e-4)
    assert fit.slope == -fit.S and fit.objective < 1e-12


@pytest.mark.parametrize("weighted", [False, True])
def test_fit_is_local_minimum(weighted):
    with open("tests/data/abs_increment_ranks.tsv") as fh:
        data = RankFrequency.read_tsv(fh)
    fit = fit_loglog(data, weighted=weighted)
    rng = np.random.default_rng(1)
    for _ in range(100):
        q, s, c = (v * (1 + rng.uniform(-0.1, 0.1)) for v in (fit.Q, fit.S, fit.intercept))
        assert fit.objective <= loglog_objective(data, q, s, c, weighted)


def test_fit_exclusions_and_errors():
    data = _exact_counts(2.0, 3.0, 10)
    fit = fit_loglog(data, exclusions=[0, 1])
    assert 0 not in fit.ranks_used and 1 not in fit.ranks_used
    with pytest.raises(ValueError):
        fit_loglog(RankFrequency((0, 1), (5, 3)))
    # a law with no finite best Q reports the scan
    with pytest.raises(ValueError, match="scan"):
        fit_loglog(RankFrequency((1, 2, 3, 4), (1000, 250, 111, 62)), q_bounds=(0.5, 50))


def test_sampled_round_trip():
    rng = np.random.default_rng(0)
    k = np.arange(0, 2000)
    p = hz_pmf(k, 0.89, 4.0)
    data = RankFrequency.from_values(rng.choice(k, size=10 ** 6, p=p / p.sum()))
    fit = fit_loglog(data, weighted=True)
    assert fit.S == pytest.approx(4.0, rel=0.05) and fit.Q == pytest.approx(0.89, rel=0.05)


def test_rank_tsv_round_trip():
    data = RankFrequency.from_counts({0: 10, 3: 4, 7: 1})
    buf = io.StringIO()
    data.write_tsv(buf)
    buf.seek(0)
    assert RankFrequency.read_tsv(buf) == data
    assert data.frequencies.sum() == pytest.approx(1.0, abs=1e-12)
    assert RankFrequency.from_values([-2, 2, 0]).counts == (1, 2)


def test_kuma_uniform_and_endpoints():
    m = kuma_moments(KumaParams(1.0, 1.0))
    assert m.mean == pytest.approx(0.5) and m.std == pytest.approx(1 / math.sqrt(12))
    p = KumaParams(0.3, 2.0, 1.0, 9.0, 0.2)
    assert kuma_cdf(1.0, p) == pytest.approx(0.2) and kuma_cdf(9.0, p) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        KumaParams(0.0, 1.0)
    with pytest.raises(ValueError):
        kuma_cdf(10.0, p)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 5), st.floats(0.3, 8), st.floats(0, 0.5))
def test_kuma_pdf_integrates(a, b, F0):
    p = KumaParams(a, b, 2.0, 5.0, F0)
    # the lower-end singularity (z-2)^(a-1) goes into the quadrature weight; the last 1e-6 of the
    # support is covered by CDF(5) = 1, since 1 - x^a loses digits right at the end in floating point
    def smooth(z):
        z = max(z, math.nextafter(2.0, 3.0))
        return kuma_pdf(z, p) / (z - 2.0) ** (a - 1)

    top = 5.0 - 1e-6
    val, _ = integrate.quad(smooth, 2.0, top, weight="alg", wvar=(a - 1, 0.0), epsabs=1e-13, epsrel=1e-12,
                            limit=200)
    assert val == pytest.approx(kuma_cdf(top, p) - F0, abs=1e-8)
    assert kuma_cdf(5.0, p) == pytest.approx(1.0, abs=1e-15)
    z = np.linspace(2, 5, 101)
    assert np.all(np.diff(kuma_cdf(z, p)) >= 0)
    assert kuma_cdf(kuma_ppf(0.7, p), p) == pytest.approx(0.7 if F0 < 0.7 else F0)


def test_kuma_moments_against_sampling():
    p = KumaParams(0.2, 2.0, 0.0, 100.0)
    z = kuma_ppf(np.random.default_rng(4).random(10 ** 6), p)
    m = kuma_moments(p)
    n = z.size
    # standard error of the sample standard deviation from the fourth moment
    se = m.std * math.sqrt((m.kurtosis + 2) / (4 * n))
    assert abs(z.std(ddof=1) - m.std) < 3 * se
    assert abs(z.mean() - m.mean) < 3 * m.std / math.sqrt(n)


def test_kuma_higher_moments_against_scipy_quadrature():
    p = KumaParams(0.7, 3.0)
    raw = [integrate.quad(lambda z: z ** r * kuma_pdf(z, p), 0, 1, epsrel=1e-13)[0] for r in range(1, 5)]
    var = raw[1] - raw[0] ** 2
    m3 = raw[2] - 3 * raw[0] * raw[1] + 2 * raw[0] ** 3
    m4 = raw[3] - 4 * raw[0] * raw[2] + 6 * raw[0] ** 2 * raw[1] - 3 * raw[0] ** 4
    m = kuma_moments(p)
    assert m.skewness == pytest.approx(m3 / var ** 1.5, rel=1e-8)
    assert m.kurtosis == pytest.approx(m4 / var ** 2 - 3, rel=1e-8)


def test_weibull_curve():
    assert weibull_moments(1.0) == pytest.approx((2.0, 6.0), rel=1e-12)
    for k in (0.7, 1.9, 5.0):
        assert weibull_moments(k) == pytest.approx((stats.weibull_min.stats(k, moments="s"),
                                                    stats.weibull_min.stats(k, moments="k")), rel=1e-9)
    k0 = weibull_zero_skew_shape()
    assert abs(weibull_moments(k0)[0]) < 1e-12
    sample = np.random.default_rng(9).weibull(k0, 10 ** 7)
    assert abs(stats.skew(sample)) < 0.01
    curve = weibull_moment_curve(np.geomspace(0.5, 3.0, 200))
    assert np.all(np.diff(curve[:, 0]) < 0)  # one kurtosis value per skewness on this branch


def test_kuma_curves_continuous():
    for a, (lo, hi) in DEFAULT_B_RANGES.items():
        c = kuma_curve(a, np.geomspace(lo, hi, 2000))
        steps = np.hypot(*np.diff(c, axis=0).T)
        assert steps.max() < 0.05 * np.ptp(c[:, 1]) + 1e-9


def test_sweep_range_for_a02():
    c = kuma_curve(0.2, [0.34, 5.5])
    assert np.all(np.isfinite(c))
    sweep = kuma_curve(0.2, np.geomspace(0.34, 5.5, 300))
    assert np.all(np.diff(sweep[:, 0]) > 0)  # skewness rises along the sweep
    assert sweep[0, 0] == pytest.approx(c[0, 0]) and sweep[-1, 1] == pytest.approx(c[1, 1])


def _summaries(a, z_max, n_sessions=40, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for b in rng.uniform(0.6, 1.6, n_sessions):
        z = kuma_ppf(rng.random(4000), KumaParams(a, b, 0.0, z_max))
        out.append(sample_moments(z))
    return out


def test_two_step_selects_generating_a():
    fit = fit_waiting_two_step(_summaries(0.1, 300.0))
    assert fit.a == 0.1
    assert np.median(fit.z_max) == pytest.approx(300.0, rel=0.25)
    assert set(fit.curves) == set(fit.distances)


def test_two_step_needs_sessions():
    with pytest.raises(ValueError):
        fit_waiting_two_step(_summaries(0.1, 300.0, n_sessions=1))
