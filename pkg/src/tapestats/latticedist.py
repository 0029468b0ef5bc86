"""Rank laws for absolute price increments and moment systems for waiting times.

Hurwitz-zeta and Zipf-Mandelbrot probability mass functions with a
straight-line fit in (ln(k+Q), ln f) coordinates, plus Kumaraswamy and
Weibull skewness/kurtosis curves and a two-step Kumaraswamy fit of
per-session waiting-time moments.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .moments import MomentSummary
from .special import hurwitz_zeta, lbeta

__all__ = [
    "RankFrequency", "ZetaLawFit", "KumaParams", "KumaMoments", "TwoStepFit",
    "hurwitz_zeta", "hz_pmf", "zm_pmf", "fit_loglog", "loglog_objective",
    "kuma_cdf", "kuma_pdf", "kuma_ppf", "kuma_moments", "kuma_curve",
    "weibull_moments", "weibull_moment_curve", "weibull_zero_skew_shape",
    "fit_waiting_two_step", "DEFAULT_B_RANGES",
]


@dataclass(frozen=True)
class RankFrequency:
    ranks: tuple[int, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.ranks) != len(self.counts):
            raise ValueError("ranks and counts differ in length")
        if len(set(self.ranks)) != len(self.ranks):
            raise ValueError("ranks must be distinct")
        if any(k < 0 for k in self.ranks):
            raise ValueError("ranks must be non-negative")
        if any(c <= 0 for c in self.counts):
            raise ValueError("counts must be positive")

    @classmethod
    def from_counts(cls, counts: Mapping[int, int]) -> "RankFrequency":
        items = sorted((int(k), int(c)) for k, c in counts.items() if c > 0)
        return cls(tuple(k for k, _ in items), tuple(c for _, c in items))

    @classmethod
    def from_values(cls, values: Iterable[int]) -> "RankFrequency":
        ks, cs = np.unique(np.abs(np.asarray(list(values), dtype=np.int64)), return_counts=True)
        return cls(tuple(int(k) for k in ks), tuple(int(c) for c in cs))

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def frequencies(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.total

    def write_tsv(self, out: TextIO) -> None:
        out.write("rank\tcount\tfrequency\n")
        for k, c, f in zip(self.ranks, self.counts, self.frequencies):
            out.write(f"{k}\t{c}\t{f:.9g}\n")

    @classmethod
    def read_tsv(cls, src: TextIO) -> "RankFrequency":
        rows = [r for r in csv.reader(src, delimiter="\t") if r and not r[0].startswith("#")]
        if rows and not rows[0][0].lstrip("-").isdigit():
            rows = rows[1:]
        return cls(tuple(int(r[0]) for r in rows), tuple(int(r[1]) for r in rows))


def _check_qs(Q: float, S: float) -> None:
    if not Q > 0:
        raise ValueError(f"Q must be positive, got {Q}")
    if not S > 1:
        raise ValueError(f"Hurwitz zeta diverges for S <= 1 (got S={S})")


def hz_pmf(k, Q: float, S: float):
    """(k+Q)^-S / ζ(Q, S) for integer k >= 0."""
    _check_qs(Q, S)
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("ranks must be non-negative")
    p = (k + Q) ** (-S) / hurwitz_zeta(Q, S)
    return float(p) if p.ndim == 0 else p


def zm_pmf(k, Q: float, S: float, n_ranks: int):
    """(k+Q)^-S normalized over k = 1..n_ranks."""
    if not Q > 0 or not S > 0:
        raise ValueError(f"need Q > 0 and S > 0, got Q={Q}, S={S}")
    k = np.asarray(k, dtype=float)
    if np.any(k < 1) or np.any(k > n_ranks):
        raise ValueError(f"rank outside 1..{n_ranks}")
    norm = math.fsum((np.arange(1, n_ranks + 1, dtype=float) + Q) ** (-S))
    p = (k + Q) ** (-S) / norm
    return float(p) if p.ndim == 0 else p


@dataclass(frozen=True)
class ZetaLawFit:
    S: float
    Q: float
    slope: float
    intercept: float
    objective: float
    weighted: bool
    ranks_used: tuple[int, ...]
    scan: tuple[tuple[float, float], ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("scan")
        return d

    def overlay(self, data: RankFrequency) -> list[tuple[float, float, float]]:
        """(ln(k+Q), ln f, fitted line) in the fitted coordinates."""
        rows = []
        for k, f in zip(data.ranks, data.frequencies):
            x = math.log(k + self.Q)
            rows.append((x, math.log(f), self.slope * x + self.intercept))
        return rows


def _wls(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float, float]:
    sw = w.sum()
    xm = np.dot(w, x) / sw
    ym = np.dot(w, y) / sw
    dx = x - xm
    slope = float(np.dot(w, dx * (y - ym)) / np.dot(w, dx * dx))
    intercept = float(ym - slope * xm)
    r = y - slope * x - intercept
    return slope, intercept, float(np.dot(w, r * r))


def _prepare(data: RankFrequency, weighted: bool, exclusions: Iterable[int]):
    excl = set(int(k) for k in exclusions)
    keep = [i for i, k in enumerate(data.ranks) if k not in excl]
    if len(keep) < 3:
        raise ValueError(f"need at least 3 ranks after exclusions, got {len(keep)}")
    k = np.asarray(data.ranks, dtype=float)[keep]
    f = data.frequencies[keep]
    w = f if weighted else np.ones_like(f)
    return k, np.log(f), w, tuple(int(x) for x in k)


def loglog_objective(data: RankFrequency, Q: float, S: float, intercept: float,
                     weighted: bool = False, exclusions: Iterable[int] = ()) -> float:
    """Sum of (weighted) squared deviations of ln f from -S ln(k+Q) + intercept."""
    k, y, w, _ = _prepare(data, weighted, exclusions)
    r = y - (-S * np.log(k + Q) + intercept)
    return float(np.dot(w, r * r))


def fit_loglog(data: RankFrequency, weighted: bool = False, exclusions: Iterable[int] = (),
               q_bounds: tuple[float, float] = (1e-6, 50.0), grid: int = 400) -> ZetaLawFit:
    """Straight line ln f = slope ln(k+Q) + intercept with S = -slope.

    Q is located by a log-spaced scan over ``q_bounds`` followed by
    golden-section refinement inside the best three-point bracket; for
    each Q the slope and intercept come from closed-form (weighted)
    least squares. Weights are the empirical frequencies when
    ``weighted`` is set.
    """
    k, y, w, used = _prepare(data, weighted, exclusions)

    def ssd(q: float) -> float:
        return _wls(np.log(k + q), y, w)[2]

    qs = np.geomspace(q_bounds[0], q_bounds[1], grid)
    vals = np.array([ssd(q) for q in qs])
    i = int(np.argmin(vals))  # first minimum, so ties go to smaller Q
    scan = tuple(zip(qs.tolist(), vals.tolist()))
    if i == 0 or i == grid - 1:
        edge = "lower" if i == 0 else "upper"
        trace = ", ".join(f"Q={q:.4g}:{v:.6g}" for q, v in scan[:: max(1, grid // 20)])
        raise ValueError(f"objective minimum at the {edge} end of Q range {q_bounds}; scan: {trace}")
    res = minimize_scalar(ssd, bracket=(qs[i - 1], qs[i], qs[i + 1]), method="golden",
                          options={"xtol": 1e-12})
    q = float(res.x) if res.fun <= vals[i] else float(qs[i])
    slope, intercept, obj = _wls(np.log(k + q), y, w)
    return ZetaLawFit(-slope, q, slope, intercept, obj, weighted, used, scan)


# Kumaraswamy ---------------------------------------------------------------

@dataclass(frozen=True)
class KumaParams:
    a: float
    b: float
    z_min: float = 0.0
    z_max: float = 1.0
    F0: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"a and b must be positive, got a={self.a}, b={self.b}")
        if not self.z_min < self.z_max:
            raise ValueError("z_min must be below z_max")
        if not 0.0 <= self.F0 < 1.0:
            raise ValueError(f"F0 must lie in [0, 1), got {self.F0}")


def _unit(p: KumaParams, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(z < p.z_min) or np.any(z > p.z_max):
        raise ValueError(f"z outside support [{p.z_min}, {p.z_max}]")
    return (z - p.z_min) / (p.z_max - p.z_min)


def kuma_cdf(z, p: KumaParams):
    x = _unit(p, z)
    with np.errstate(divide="ignore"):  # log1p(-1) = -inf gives CDF 1 at z_max
        out = p.F0 + (1 - p.F0) * -np.expm1(p.b * np.log1p(-(x ** p.a)))
    return float(out) if out.ndim == 0 else out


def kuma_pdf(z, p: KumaParams):
    x = _unit(p, z)
    with np.errstate(divide="ignore"):
        out = (p.a * p.b * (1 - p.F0) / (p.z_max - p.z_min)
               * x ** (p.a - 1) * (1 - x ** p.a) ** (p.b - 1))
    return float(out) if out.ndim == 0 else out


def kuma_ppf(u, p: KumaParams):
    """Inverse CDF; probabilities at or below F0 map to z_min."""
    u = np.asarray(u, dtype=float)
    v = np.clip((u - p.F0) / (1 - p.F0), 0.0, 1.0)
    x = (-np.expm1(np.log1p(-v) / p.b)) ** (1.0 / p.a)
    out = p.z_min + (p.z_max - p.z_min) * x
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KumaMoments:
    mean: float
    std: float
    skewness: float
    kurtosis: float  # excess


def _central(r1, r2, r3, r4) -> tuple[float, float, float, float]:
    var = r2 - r1 ** 2
    m3 = r3 - 3 * r1 * r2 + 2 * r1 ** 3
    m4 = r4 - 4 * r1 * r3 + 6 * r1 ** 2 * r2 - 3 * r1 ** 4
    return r1, math.sqrt(var), m3 / var ** 1.5, m4 / var ** 2 - 3.0


def kuma_moments(p: KumaParams) -> KumaMoments:
    """Moments from raw moments m_r = (1-F0) z^r b B(1 + r/a, b) of z - z_min."""
    width = p.z_max - p.z_min
    # raw moments of the unit variable, then shift and scale
    raw = [(1 - p.F0) * math.exp(math.log(p.b) + lbeta(1 + r / p.a, p.b)) for r in range(1, 5)]
    mean, std, skew, kurt = _central(*raw)
    return KumaMoments(p.z_min + width * mean, width * std, skew, kurt)


def kuma_curve(a: float, bs: Sequence[float]) -> np.ndarray:
    """(skewness, excess kurtosis) rows along a sweep of b with z_min = 0, F0 = 0."""
    out = []
    for b in bs:
        m = kuma_moments(KumaParams(a, float(b)))
        out.append((m.skewness, m.kurtosis))
    return np.asarray(out)


# Weibull ---------------------------------------------------------------------

def weibull_moments(shape: float) -> tuple[float, float]:
    """(skewness, excess kurtosis) of the Weibull law, from Γ(1 + r/shape)."""
    if not shape > 0:
        raise ValueError(f"shape must be positive, got {shape}")
    g = [math.gamma(1 + r / shape) for r in range(1, 5)]
    _, _, skew, kurt = _central(*g)
    return skew, kurt


def weibull_moment_curve(shapes: Iterable[float]) -> np.ndarray:
    return np.asarray([weibull_moments(float(k)) for k in shapes])


def weibull_zero_skew_shape() -> float:
    """Shape parameter where the Weibull skewness changes sign."""
    return brentq(lambda k: weibull_moments(k)[0], 2.0, 5.0, xtol=1e-14)


# Two-step waiting-time fit ----------------------------------------------------

DEFAULT_B_RANGES = {
    0.2: (0.34, 5.5),
    0.15: (0.3, 3.8),
    0.1: (0.3, 2.8),
    1e-5: (0.058, 0.435),
}


@dataclass
class TwoStepFit:
    a: float
    distances: dict  # a -> summed distance of session points to that curve
    z_max: list[float]
    b: list[float]
    curves: dict = field(repr=False)  # a -> array of (skewness, kurtosis)

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "distances": {repr(k): v for k, v in self.distances.items()},
            "z_max": self.z_max,
            "b": self.b,
        }


def _point_polyline_distance(pts: np.ndarray, line: np.ndarray) -> np.ndarray:
    p0, p1 = line[:-1], line[1:]
    seg = p1 - p0
    seg_len2 = np.maximum((seg ** 2).sum(axis=1), 1e-300)
    # project every point on every segment
    t = ((pts[:, None, :] - p0[None]) * seg[None]).sum(axis=2) / seg_len2[None]
    t = np.clip(t, 0.0, 1.0)
    proj = p0[None] + t[..., None] * seg[None]
    d = np.sqrt(((pts[:, None, :] - proj) ** 2).sum(axis=2))
    return d.min(axis=1)


def fit_waiting_two_step(summaries: Sequence[MomentSummary], a_grid: Sequence[float] = (0.05, 0.1, 0.15, 0.2),
                         b_ranges: Mapping[float, tuple[float, float]] | None = None,
                         b_points: int = 400) -> TwoStepFit:
    """Choose a, then a per-session z_max, from waiting-time sample moments.

    Step 1 picks the a whose (skewness, excess kurtosis) curve, swept over
    its admissible b interval, lies closest to the session points (sum of
    distances to the curve). Step 2 fixes a and for each session finds the
    point on the b-sweep whose (mean, std) direction, scaled by the least
    squares z_max, is closest to the session's (mean, std).
    """
    if len(summaries) < 10:
        raise ValueError(f"need at least 10 session summaries, got {len(summaries)}")
    if any(s.skewness is None or s.kurtosis is None or s.std is None for s in summaries):
        raise ValueError("every summary needs mean, std, skewness and kurtosis")
    ranges = dict(b_ranges) if b_ranges is not None else {}
    pts = np.array([(s.skewness, s.kurtosis) for s in summaries])
    distances, curves = {}, {}
    for a in a_grid:
        lo, hi = ranges.get(a, DEFAULT_B_RANGES.get(a, (0.05, 20.0)))
        if not 0 < lo < hi:
            continue
        bs = np.geomspace(lo, hi, b_points)
        curve = kuma_curve(a, bs)
        ok = np.all(np.isfinite(curve), axis=1)
        if ok.sum() < 2:
            continue
        curves[a] = curve[ok]
        distances[a] = float(_point_polyline_distance(pts, curve[ok]).sum())
    if not distances:
        raise ValueError("no a in the grid has an admissible b interval")
    best_a = min(distances, key=lambda a: (distances[a], a))

    lo, hi = ranges.get(best_a, DEFAULT_B_RANGES.get(best_a, (0.05, 20.0)))
    bs = np.geomspace(lo, hi, b_points)
    unit = np.array([(m.mean, m.std) for m in (kuma_moments(KumaParams(best_a, float(b))) for b in bs)])
    z_list, b_list = [], []
    for s in summaries:
        y = np.array([s.mean, s.std])
        z = unit @ y / (unit ** 2).sum(axis=1)
        resid = ((z[:, None] * unit - y) ** 2).sum(axis=1)
        j = int(np.argmin(resid))
        z_list.append(float(z[j]))
        b_list.append(float(bs[j]))
    return TwoStepFit(best_a, distances, z_list, b_list, curves)
