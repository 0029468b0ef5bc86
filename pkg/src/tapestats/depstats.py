"""Dependence between waiting times and price increments.

Contingency frequencies of (a, b) pairs, the L1, log-likelihood and
chi-square statistics with their rejection thresholds, per-waiting-time
variance slices and the double-log regression of variance growth.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .moments import MomentSummary, OlsFit, ols, sample_moments

__all__ = [
    "Contingency", "DependenceReport", "VarianceSlices", "IntervalAggregate", "DoubleLogFit",
    "contingency", "dependence_statistics", "thresholds", "variance_slices", "dloglog_fit",
    "REFERENCE_BASELINE_VARIANCE",
]

# zero-wait variance of b-increments used to label reports
REFERENCE_BASELINE_VARIANCE = 0.33377


@dataclass(frozen=True)
class Contingency:
    a_values: tuple
    b_values: tuple
    joint: np.ndarray  # counts, shape (m_A, m_B)
    n: int

    @property
    def m_a(self) -> int:
        return len(self.a_values)

    @property
    def m_b(self) -> int:
        return len(self.b_values)

    @property
    def m_ab(self) -> int:
        return int(np.count_nonzero(self.joint))

    @property
    def nu_ab(self) -> np.ndarray:
        return self.joint / self.n

    @property
    def nu_a(self) -> np.ndarray:
        return self.joint.sum(axis=1) / self.n

    @property
    def nu_b(self) -> np.ndarray:
        return self.joint.sum(axis=0) / self.n


def contingency(pairs: Iterable[tuple]) -> Contingency:
    counts = Counter(pairs)
    a_vals = tuple(sorted({a for a, _ in counts}))
    b_vals = tuple(sorted({b for _, b in counts}))
    ia = {a: i for i, a in enumerate(a_vals)}
    ib = {b: j for j, b in enumerate(b_vals)}
    joint = np.zeros((len(a_vals), len(b_vals)), dtype=np.int64)
    for (a, b), c in counts.items():
        joint[ia[a], ib[b]] = c
    return Contingency(a_vals, b_vals, joint, int(joint.sum()))


def thresholds(m_a: int, m_b: int, n: int) -> tuple[float, float]:
    """Rejection thresholds (ε_L, ε_I) for the L1 and log-likelihood statistics."""
    prod = m_a * m_b
    eps_l = math.sqrt(2 * math.log(2)) * math.sqrt(prod / n)
    eps_i = prod * (2 * math.log(n + prod) + 1) / n
    return eps_l, eps_i


@dataclass(frozen=True)
class DependenceReport:
    n: int
    m_a: int
    m_b: int
    m_ab: int
    L: float
    I: float
    chi2: float
    xi: float
    eps_L: float
    eps_I: float
    log_base: str = "e"

    @property
    def reject_L(self) -> bool:
        return self.L > self.eps_L

    @property
    def reject_I(self) -> bool:
        return self.I > self.eps_I

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reject_L"] = self.reject_L
        d["reject_I"] = self.reject_I
        return d


def dependence_statistics(pairs: Iterable[tuple] | Contingency) -> DependenceReport:
    """L1 distance, log-likelihood and chi-square between joint and product frequencies.

    L sums |ν_AB - ν_A ν_B| over the whole product alphabet; I sums
    2 ν_AB ln(ν_AB / (ν_A ν_B)) where ν_AB > 0; the normalized chi-square
    is ξ = (n χ² - m_A m_B) / sqrt(2 m_A m_B).
    """
    ct = pairs if isinstance(pairs, Contingency) else contingency(pairs)
    if ct.n < 2:
        raise ValueError(f"need at least 2 pairs, got {ct.n}")
    nu = ct.nu_ab
    prod = np.outer(ct.nu_a, ct.nu_b)  # strictly positive on the product alphabet
    L = float(np.abs(nu - prod).sum())
    pos = nu > 0
    I = float(2.0 * np.sum(nu[pos] * np.log(nu[pos] / prod[pos])))
    chi2 = float(np.sum((nu - prod) ** 2 / prod))
    k = ct.m_a * ct.m_b
    xi = (ct.n * chi2 - k) / math.sqrt(2 * k)
    eps_l, eps_i = thresholds(ct.m_a, ct.m_b, ct.n)
    # rounding can leave a tiny negative I for an exact product table
    return DependenceReport(ct.n, ct.m_a, ct.m_b, ct.m_ab, L, max(I, 0.0), chi2, xi, eps_l, eps_i)


@dataclass(frozen=True)
class IntervalAggregate:
    a_left: int
    a_right: int
    slices: int
    variance_moments: MomentSummary


@dataclass
class VarianceSlices:
    slices: dict  # a -> MomentSummary of b for every a with >= min_size pairs
    intervals: list[IntervalAggregate]
    total_pairs: int
    skipped_pairs: int  # pairs in slices below the size rule
    baseline: MomentSummary | None = None

    def slice_rows(self) -> list[tuple]:
        """(a, n, mean, variance, skewness, kurtosis) rows."""
        return [(a, s.n, s.mean, s.variance, s.skewness, s.kurtosis) for a, s in sorted(self.slices.items())]

    def interval_rows(self) -> list[tuple]:
        """(a_left, a_right, mean, min, max, std, skewness, kurtosis) of slice variances."""
        out = []
        for iv in self.intervals:
            v = iv.variance_moments
            out.append((iv.a_left, iv.a_right, v.mean, v.min, v.max, v.std, v.skewness, v.kurtosis))
        return out


def variance_slices(pairs: Iterable[tuple[int, int]], width: int = 10, min_size: int = 3,
                    baseline_a: int | None = 0) -> VarianceSlices:
    """Moments of b for each waiting time a, then moments of the slice variances
    over consecutive groups of ``width`` qualifying slices.

    The slice at ``baseline_a`` is kept separately as the reference and
    not grouped; a trailing group with fewer than ``width`` slices is dropped.
    """
    by_a: dict = {}
    for a, b in pairs:
        by_a.setdefault(a, []).append(b)
    if not by_a:
        raise ValueError("no pairs")
    total = sum(len(v) for v in by_a.values())
    slices, skipped = {}, 0
    for a in sorted(by_a):
        bs = by_a[a]
        if len(bs) < min_size:
            skipped += len(bs)
            continue
        slices[a] = sample_moments(bs)
    baseline = slices.get(baseline_a) if baseline_a is not None else None
    keys = [a for a in sorted(slices) if a != baseline_a]
    intervals = []
    for i in range(0, len(keys) - width + 1, width):
        group = keys[i:i + width]
        var = [slices[a].variance for a in group]
        intervals.append(IntervalAggregate(group[0], group[-1], len(group), sample_moments(var)))
    return VarianceSlices(slices, intervals, total, skipped, baseline)


@dataclass
class DoubleLogFit:
    fit: OlsFit
    baseline: float
    used: list[tuple[float, float]]  # (a centre, mean variance)
    excluded: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"fit": self.fit.to_dict(), "baseline": self.baseline,
                "used": len(self.used), "excluded": len(self.excluded)}


def dloglog_fit(points: VarianceSlices | Sequence[tuple[float, float]], baseline: float,
                confidence: float = 0.95) -> DoubleLogFit:
    """Regress ln ln(μ2(a)/μ2(0)) on ln a.

    ``points`` are (a, mean variance) pairs or the interval aggregates of
    a ``VarianceSlices`` (a = interval centre). Points with μ2(a) not above
    the baseline have no double log and are excluded.
    """
    if not baseline > 0:
        raise ValueError(f"baseline variance must be positive, got {baseline}")
    if isinstance(points, VarianceSlices):
        pts = [((iv.a_left + iv.a_right) / 2, iv.variance_moments.mean) for iv in points.intervals]
    else:
        pts = [(float(a), float(v)) for a, v in points]
    used = [(a, v) for a, v in pts if a > 0 and v > baseline]
    excluded = [(a, v) for a, v in pts if not (a > 0 and v > baseline)]
    if len(used) < 3:
        raise ValueError(f"need at least 3 points above the baseline, got {len(used)}")
    x = [math.log(a) for a, _ in used]
    y = [math.log(math.log(v / baseline)) for _, v in used]
    return DoubleLogFit(ols(x, y, False, confidence), baseline, used, excluded)
