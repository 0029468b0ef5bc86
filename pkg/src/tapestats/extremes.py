"""Per-session extreme price increments and a discrete heavy-tailed law for them.

The discrete law is the type-II extreme value density sampled on the
positive integers,

    PMF(n) ∝ k b (b n + a)^-(k+1) exp(-(b n + a)^-k),  n >= 1,  PMF(0) = 0.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .latticedist import RankFrequency

log = logging.getLogger(__name__)

__all__ = [
    "SessionExtremes", "ExtremesSummary", "Ftg2Params", "Ftg2Fit", "session_extremes",
    "ftg2_terms", "ftg2_pmf", "ftg2_normalizer", "ftg2_sample", "fit_ftg2",
]


@dataclass(frozen=True)
class SessionExtremes:
    label: str
    min: int
    n_min: int
    max: int
    n_max: int


@dataclass
class ExtremesSummary:
    sessions: list[SessionExtremes]
    maxima: dict  # signed rank -> frequency over sessions
    minima: dict
    combined: dict  # both wings pooled over 2 x sessions
    max_ranks: RankFrequency | None  # |max| counts, for rank-law fits
    min_ranks: RankFrequency | None

    def table_rows(self) -> list[tuple]:
        return [(s.label, s.min, s.n_min, s.max, s.n_max) for s in self.sessions]

    def epmf_rows(self, which: str = "combined") -> list[tuple[int, float]]:
        return sorted(getattr(self, which).items())


def _epmf(values: Sequence[int]) -> dict:
    c = Counter(values)
    n = len(values)
    return {k: v / n for k, v in sorted(c.items())}


def session_extremes(sessions: Sequence[Sequence[int]], labels: Sequence[str] | None = None) -> ExtremesSummary:
    """Largest and smallest b-increment of every session with their in-session counts."""
    labels = list(labels) if labels is not None else [str(i) for i in range(len(sessions))]
    if len(labels) != len(sessions):
        raise ValueError("one label per session is required")
    out = []
    for lab, b in zip(labels, sessions):
        b = np.asarray(b, dtype=np.int64)
        if b.size == 0:
            log.warning("session %s has no b-increments; skipped", lab)
            continue
        lo, hi = int(b.min()), int(b.max())
        out.append(SessionExtremes(lab, lo, int((b == lo).sum()), hi, int((b == hi).sum())))
    if not out:
        return ExtremesSummary([], {}, {}, {}, None, None)
    maxima = [s.max for s in out]
    minima = [s.min for s in out]
    return ExtremesSummary(
        out,
        _epmf(maxima),
        _epmf(minima),
        _epmf(maxima + minima),
        RankFrequency.from_values(maxima),
        RankFrequency.from_values(minima),
    )


@dataclass(frozen=True)
class Ftg2Params:
    k: float
    b: float
    a: float = 0.0

    def __post_init__(self):
        if not (self.k > 0 and self.b > 0):
            raise ValueError(f"k and b must be positive, got k={self.k}, b={self.b}")
        if not self.a >= 0:
            raise ValueError(f"a must be non-negative, got {self.a}")


def ftg2_terms(n, p: Ftg2Params) -> np.ndarray:
    """Unnormalized terms; zero at n = 0."""
    n = np.asarray(n, dtype=float)
    u = p.b * n + p.a
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        t = p.k * p.b * np.exp(-(p.k + 1) * np.log(u) - u ** (-p.k))
    return np.where(n >= 1, np.nan_to_num(t, nan=0.0), 0.0)


def _tail(p: Ftg2Params, N: int) -> tuple[float, float] | None:
    """Σ_{n>=N} terms by Euler-Maclaurin, with its error bound; None if not yet convex."""
    u = p.b * N + p.a
    y = p.k * u ** (-p.k)
    k1 = p.k + 1
    y1 = (3 * k1 - math.sqrt(9 * k1 * k1 - 4 * k1 * (p.k + 2))) / 2
    if y >= y1:
        return None
    f = float(ftg2_terms(N, p))
    # df/dn = b^2 g'(u), g' = g (-(k+1)/u + k u^(-k-1))
    g = f / p.b
    dfdn = p.b ** 2 * g * (-k1 / u + p.k * u ** (-p.k - 1))
    integral = -math.expm1(-u ** (-p.k))
    # for convex f the trapezoid excess lies in [0, |f'(N)|/8]
    return integral + f / 2 - dfdn / 12, abs(dfdn) / 12


def ftg2_normalizer(p: Ftg2Params, tol: float = 1e-12, max_terms: int = 10 ** 8) -> tuple[float, float]:
    """Σ_{n>=1} of the unnormalized terms and a certified bound on its error."""
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    N = 64
    while True:
        t = _tail(p, N)
        if t is not None and t[1] <= tol:
            break
        N *= 2
        if N > max_terms:
            raise RuntimeError(f"normalizer needs more than {max_terms} terms at tol={tol}")
    head = math.fsum(ftg2_terms(np.arange(1, N), p))
    return head + t[0], t[1]


def ftg2_pmf(n, p: Ftg2Params, tol: float = 1e-12):
    if np.any(np.asarray(n) < 0):
        raise ValueError("n must be non-negative")
    z, _ = ftg2_normalizer(p, tol)
    out = ftg2_terms(n, p) / z
    return float(out) if out.ndim == 0 else out


def ftg2_sample(rng: np.random.Generator, size: int, p: Ftg2Params, tail: float = 1e-10,
                max_rank: int = 10 ** 7) -> np.ndarray:
    """Inverse-CDF draws; ranks beyond the point where the neglected mass,
    bounded by the tail integral, drops below ``tail`` are never drawn."""
    z, _ = ftg2_normalizer(p)
    # mass beyond N is at most the integral from N - 1, i.e. 1 - exp(-u^-k)
    u_needed = (-math.log1p(-min(tail * z, 0.5))) ** (-1.0 / p.k)
    N = int(min(max_rank, max(16, math.ceil((u_needed - p.a) / p.b) + 2)))
    cdf = np.cumsum(ftg2_terms(np.arange(0, N + 1), p))
    return np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")


@dataclass
class Ftg2Fit:
    params: Ftg2Params
    log_likelihood: float
    chi2: float
    dof: int
    converged: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = asdict(self.params)
        return d


def fit_ftg2(counts: Mapping[int, int], starts: int = 20, seed: int = 0, tol: float = 1e-8) -> Ftg2Fit:
    """Maximum-likelihood (k, b, a) by Nelder-Mead on (ln k, ln b, ln(a + 1e-12))."""
    data = sorted((int(n), int(c)) for n, c in counts.items() if c > 0)
    if any(n < 1 for n, _ in data):
        raise ValueError("ranks must be >= 1 (the law has no mass at 0)")
    if len(data) < 5:
        raise ValueError(f"need at least 5 distinct ranks, got {len(data)}")
    ns = np.array([n for n, _ in data], dtype=float)
    cs = np.array([c for _, c in data], dtype=float)
    total = cs.sum()

    def unpack(theta) -> Ftg2Params:
        return Ftg2Params(math.exp(theta[0]), math.exp(theta[1]), math.exp(theta[2]))

    def nll(theta) -> float:
        if np.any(np.abs(theta[:2]) > 20) or theta[2] > 5:
            return math.inf
        p = unpack(theta)
        try:
            z, _ = ftg2_normalizer(p, 1e-10, max_terms=2 ** 22)
        except RuntimeError:
            return math.inf
        t = ftg2_terms(ns, p)
        if np.any(t <= 0):
            return math.inf
        return float(-(cs @ np.log(t)) + total * math.log(z)) / total

    rng = np.random.default_rng(seed)
    # crude starting scale: the mode of the data sits near b n ~ 1
    mode = ns[np.argmax(cs)]
    best, best_f, ok = None, math.inf, False
    for i in range(starts):
        x0 = np.array([
            math.log(rng.uniform(0.5, 4.0)),
            math.log(rng.uniform(0.2, 2.0) / mode),
            math.log(rng.uniform(1e-3, 1.0)),
        ])
        res = minimize(nll, x0, method="Nelder-Mead",
                       options={"xatol": tol, "fatol": tol, "maxfev": 3000})
        if res.fun < best_f:
            best, best_f, ok = res.x, res.fun, bool(res.success)
    p = unpack(best)
    probs = ftg2_pmf(ns, p)
    expected = probs * total
    chi2 = float(np.sum((cs - expected) ** 2 / expected))
    return Ftg2Fit(p, float(-best_f * total), chi2, len(data) - 1 - 3, ok)
