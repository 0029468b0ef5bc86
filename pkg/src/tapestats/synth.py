"""Synthetic Time & Sales generator.

A lattice price walk whose absolute steps follow the Hurwitz-zeta law
with independent signs, Kumaraswamy waiting times rounded to seconds,
daily volume following the life curve and prices held inside the daily
limit band. Every day draws from its own counter-based stream derived
from the seed and the day index, so output does not depend on the order
in which days are generated.
"""
from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from decimal import Decimal

import numpy as np

from .latticedist import KumaParams, hz_pmf, kuma_ppf
from .lifecurve import LifeCurveParams, v_eval
from .tickstore import LatticeSpec, LimitBand, SessionRange, Tick, write_ticks

__all__ = ["GeneratorSpec", "generate_session", "generate_lifecycle", "generate_corpus", "session_csv"]

_LIFECYCLE_STREAM = 2 ** 32  # spawn key reserved for the volume series


@dataclass(frozen=True)
class GeneratorSpec:
    lattice: LatticeSpec
    band: LimitBand
    Q: float
    S: float
    p_up: float
    wait: KumaParams
    life: LifeCurveParams
    seed: int = 0
    mean_size: float = 1.0  # contracts per tick; sizes are 1 + Poisson(mean_size - 1)
    start_date: date = date(2016, 1, 4)
    open_time: time = time(8, 30)
    zero_steps: bool = False  # degenerate law: every b-increment is 0

    def __post_init__(self):
        if not 0.0 <= self.p_up <= 1.0:
            raise ValueError(f"p_up must lie in [0, 1], got {self.p_up}")
        if self.mean_size < 1:
            raise ValueError("mean_size must be at least 1")
        if not self.zero_steps:
            hz_pmf(0, self.Q, self.S)  # validates Q and S

    def step_probs(self) -> np.ndarray:
        """Probabilities of |b| = 0..2*limit; steps beyond the band width cannot be realized."""
        kmax = 2 * self.band.limit
        if self.zero_steps:
            p = np.zeros(kmax + 1)
            p[0] = 1.0
            return p
        p = hz_pmf(np.arange(kmax + 1), self.Q, self.S)
        return p / p.sum()

    def to_dict(self) -> dict:
        return {
            "delta": str(self.lattice.delta),
            "settle": self.band.settle,
            "limit": self.band.limit,
            "Q": self.Q,
            "S": self.S,
            "p_up": self.p_up,
            "wait": {"a": self.wait.a, "b": self.wait.b, "z_max": self.wait.z_max},
            "life": self.life.to_dict(),
            "seed": self.seed,
            "mean_size": self.mean_size,
            "start_date": self.start_date.isoformat(),
            "open_time": self.open_time.isoformat(),
            "zero_steps": self.zero_steps,
        }


def _rng(seed: int, key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(key,))))


def generate_session(spec: GeneratorSpec, tau: int) -> SessionRange:
    """One day of ticks at age ``tau`` of the contract."""
    if not 0 < tau < spec.life.L:
        raise ValueError(f"tau must lie in (0, {spec.life.L}), got {tau}")
    rng = _rng(spec.seed, tau)
    volume = v_eval(spec.life, float(tau))
    # the tick budget follows the life curve; Poisson scatter belongs to generate_lifecycle
    n = max(2, int(round(volume / spec.mean_size)))
    waits = np.rint(kuma_ppf(rng.random(n - 1), spec.wait)).astype(np.int64)
    mags = rng.choice(len(spec.step_probs()), size=n - 1, p=spec.step_probs())
    signs = np.where(rng.random(n - 1) < spec.p_up, 1, -1)
    sizes = 1 + (rng.poisson(spec.mean_size - 1, size=n) if spec.mean_size > 1 else np.zeros(n, dtype=np.int64))

    day = spec.start_date + timedelta(days=int(tau))
    t0 = datetime.combine(day, spec.open_time)
    m = spec.band.settle
    ticks = [Tick(t0, m, int(sizes[0]))]
    elapsed = 0
    for w, k, s, sz in zip(waits, mags, signs, sizes[1:]):
        elapsed += int(w)
        # steps that would leave the band stop at the limit
        m = min(spec.band.up, max(spec.band.down, m + int(s * k)))
        ticks.append(Tick(t0 + timedelta(seconds=elapsed), m, int(sz)))
    return SessionRange("custom", ticks[0].timestamp, ticks[-1].timestamp, tuple(ticks), day)


def generate_lifecycle(spec: GeneratorSpec) -> np.ndarray:
    """Poisson daily volumes around V(τ) for τ = 1 .. ceil(L) - 1."""
    rng = _rng(spec.seed, _LIFECYCLE_STREAM)
    taus = np.arange(1, int(math.ceil(spec.life.L)))
    mean = np.array([v_eval(spec.life, float(t)) for t in taus])
    return rng.poisson(mean)


def session_csv(rng: SessionRange, lattice: LatticeSpec) -> str:
    buf = io.StringIO()
    write_ticks([rng], lattice, buf)
    return buf.getvalue()


@dataclass
class Corpus:
    sessions: list[SessionRange]
    checksums: dict = field(default_factory=dict)  # session date -> sha256 of its CSV text


def generate_corpus(spec: GeneratorSpec, taus=None) -> Corpus:
    taus = range(1, int(math.ceil(spec.life.L))) if taus is None else taus
    out = Corpus([])
    for tau in taus:
        s = generate_session(spec, tau)
        out.sessions.append(s)
        out.checksums[s.session.isoformat()] = hashlib.sha256(session_csv(s, spec.lattice).encode()).hexdigest()
    return out
