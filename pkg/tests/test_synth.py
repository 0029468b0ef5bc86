import hashlib
from dataclasses import replace
from decimal import Decimal

import numpy as np
import pytest

from tapestats.latticedist import KumaParams, RankFrequency, fit_loglog, fit_waiting_two_step
from tapestats.lifecurve import LifeCurveParams, fit_chebyshev
from tapestats.moments import sample_moments
from tapestats.synth import (
    GeneratorSpec, generate_corpus, generate_lifecycle, generate_session, session_csv,
)
from tapestats.tickstore import LatticeSpec, LimitBand, increments, parse_ticks

LAT = LatticeSpec(Decimal("0.25"))
BAND = LimitBand.from_prices(Decimal("354.00"), Decimal("25.00"), LAT)


def make_spec(**kw) -> GeneratorSpec:
    base = dict(
        lattice=LAT, band=BAND, Q=0.89, S=4.0, p_up=0.5,
        wait=KumaParams(0.1, 1.0, 0.0, 300.0),
        life=LifeCurveParams(0.02, 1.0, 1.0, 0.0, 41.0),
        seed=7,
    )
    base.update(kw)
    return GeneratorSpec(**base)


def test_zero_steps_give_constant_prices():
    s = generate_session(make_spec(zero_steps=True), 10)
    assert len(s) > 2
    assert set(s.prices) == {BAND.settle}


def test_fixed_seed_is_byte_identical():
    a = generate_corpus(make_spec())
    b = generate_corpus(make_spec())
    assert a.checksums == b.checksums
    assert [session_csv(s, LAT) for s in a.sessions] == [session_csv(s, LAT) for s in b.sessions]
    c = generate_corpus(make_spec(seed=8))
    assert c.checksums != a.checksums


def test_output_independent_of_generation_order():
    spec = make_spec()
    fwd = generate_corpus(spec)
    rev = generate_corpus(spec, taus=range(40, 0, -1))
    assert fwd.checksums == rev.checksums


def test_checksums_match_csv_text():
    corpus = generate_corpus(make_spec(), taus=[3, 4])
    for s in corpus.sessions:
        text = session_csv(s, LAT)
        assert corpus.checksums[s.session.isoformat()] == hashlib.sha256(text.encode()).hexdigest()


def test_csv_flows_through_parser():
    s = generate_session(make_spec(), 5)
    back = parse_ticks(session_csv(s, LAT), LAT)
    assert [t.m for r in back for t in r.ticks] == s.prices
    assert sum(r.volume for r in back) == s.volume


def test_prices_on_lattice_and_inside_band():
    # a wide step law and a narrow band force clamping
    band = LimitBand(1416, 6, LAT)
    spec = make_spec(band=band, S=1.2, Q=3.0, p_up=0.8)
    top = []
    for tau in (1, 10, 20, 30, 40):
        s = generate_session(spec, tau)
        assert all(isinstance(m, int) and band.contains(m) for m in s.prices)
        top.append(max(s.prices))
        for t in s.ticks:
            assert LAT.index(LAT.price(t.m)) == t.m
    assert max(top) == band.up


@pytest.mark.parametrize("mean_size", [1.0, 3.5])
def test_tick_count_not_above_volume(mean_size):
    spec = make_spec(mean_size=mean_size)
    for s in generate_corpus(spec).sessions:
        assert len(s) <= s.volume
        assert all(t.size >= 1 for t in s.ticks)


def test_timestamps_whole_seconds_and_ordered():
    s = generate_session(make_spec(), 12)
    ts = [t.timestamp for t in s.ticks]
    assert ts == sorted(ts)
    assert all(t.microsecond == 0 for t in ts)
    a = increments(s).a
    assert min(a) >= 0 and max(a) <= 300


def test_invalid_inputs():
    with pytest.raises(ValueError):
        generate_session(make_spec(), 0)
    with pytest.raises(ValueError):
        generate_session(make_spec(), 41)
    with pytest.raises(ValueError):
        make_spec(p_up=1.5)
    with pytest.raises(ValueError):
        make_spec(S=0.5)


def test_zero_amplitude_lifecycle():
    spec = make_spec(life=LifeCurveParams(0.0, 1.0, 1.0, 0.01, 50.0))
    assert np.all(generate_lifecycle(spec) == 0)


def test_symmetric_lifecycle_peaks_mid_life():
    L = 401.0
    spec = make_spec(life=LifeCurveParams(1.0, 1.0, 1.0, 0.0, L))
    vols = generate_lifecycle(spec)
    assert len(vols) == 400
    # smooth the Poisson noise before locating the peak
    smooth = np.convolve(vols, np.ones(21) / 21, mode="same")
    assert abs(np.argmax(smooth) + 1 - L / 2) < 0.05 * L


def test_lifecycle_recovers_birth_exponent():
    life = LifeCurveParams(4e-5, 1.0, 1.0, 0.017, 730.0)
    vols = generate_lifecycle(make_spec(life=life))
    obs = [(t, v) for t, v in enumerate(vols, start=1)]
    fit = fit_chebyshev(obs, life.L, life.C)
    assert fit.params.B == pytest.approx(life.B, rel=0.10)


def test_waiting_moments_closest_to_generating_curve():
    spec = make_spec(life=LifeCurveParams(0.3, 1.0, 1.0, 0.0, 61.0))
    summaries = [sample_moments(increments(s).a) for s in generate_corpus(spec).sessions]
    fit = fit_waiting_two_step(summaries)
    assert fit.a == 0.1
    assert fit.distances[0.1] == min(fit.distances.values())


def test_corpus_recovers_power_law():
    # 2000 sessions of a couple hundred ticks each
    spec = make_spec(life=LifeCurveParams(3e-4, 1.0, 1.0, 0.0, 2001.0))
    ranks = RankFrequency.from_values(
        abs(b) for s in generate_corpus(spec).sessions for b in increments(s).b
    )
    assert ranks.total > 2 * 10 ** 5
    fit = fit_loglog(ranks, weighted=True)
    assert fit.S == pytest.approx(4.0, rel=0.05)


def test_spec_serializes():
    d = make_spec().to_dict()
    assert d["S"] == 4.0 and d["wait"]["z_max"] == 300.0 and d["life"]["L"] == 41.0
    assert replace(make_spec(), seed=3).to_dict()["seed"] == 3
