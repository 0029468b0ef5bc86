"""Sample moments, Gaussian reference arithmetic and goodness of fit."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .special import t_quantile


@dataclass(frozen=True)
class MomentSummary:
    n: int
    mean: float
    min: float
    max: float
    n_min: int
    n_max: int
    m2: float
    m3: float
    m4: float
    variance: float | None
    std: float | None
    skewness: float | None
    kurtosis: float | None  # excess
    mu3: float | None = None
    mu4: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _as_counts(data) -> list[tuple[float, int]]:
    if isinstance(data, Mapping):
        items = [(v, int(c)) for v, c in data.items() if c]
        if any(c < 0 for _, c in items):
            raise ValueError("counts must be non-negative")
    else:
        items = list(Counter(np.asarray(data).ravel().tolist()).items())
    return sorted(items)


def sample_moments(data) -> MomentSummary:
    """Mean, bias-corrected variance, skewness and excess kurtosis.

    ``data`` is a sequence of numbers or a ``{value: count}`` mapping.
    Central moment estimates use the corrections

        mu2 = n/(n-1) m2
        mu3 = n^2/((n-1)(n-2)) m3
        mu4 = (n(n^2-2n+3) m4 - 3n(2n-3) m2^2) / ((n-1)(n-2)(n-3))

    Statistics needing more points than available are ``None``; so are
    skewness and kurtosis of a constant sample.
    """
    pairs = _as_counts(data)
    n = sum(c for _, c in pairs)
    if n < 1:
        raise ValueError("sample is empty")
    mean = math.fsum(v * c for v, c in pairs) / n
    m2 = math.fsum(c * (v - mean) ** 2 for v, c in pairs) / n
    m3 = math.fsum(c * (v - mean) ** 3 for v, c in pairs) / n
    m4 = math.fsum(c * (v - mean) ** 4 for v, c in pairs) / n
    lo, n_lo = pairs[0]
    hi, n_hi = pairs[-1]

    variance = std = skew = kurt = mu3 = mu4 = None
    if n >= 2:
        variance = n / (n - 1) * m2
        std = math.sqrt(variance)
    if n >= 3:
        mu3 = n * n / ((n - 1) * (n - 2)) * m3
        if variance > 0:
            skew = mu3 / variance ** 1.5
    if n >= 4:
        mu4 = (n * (n * n - 2 * n + 3) * m4 - 3 * n * (2 * n - 3) * m2 ** 2) / ((n - 1) * (n - 2) * (n - 3))
        if variance > 0:
            kurt = mu4 / variance ** 2 - 3.0
    return MomentSummary(n, mean, lo, hi, n_lo, n_hi, m2, m3, m4, variance, std, skew, kurt, mu3, mu4)


@dataclass(frozen=True)
class IdentityReport:
    n: int
    price_mean: Fraction
    increment_mean: Fraction | None
    mean_from_increments: Fraction
    weighted_sum: Fraction
    weighted_sum_from_prices: Fraction

    @property
    def holds(self) -> bool:
        return self.price_mean == self.mean_from_increments and self.weighted_sum == self.weighted_sum_from_prices


def price_mean_identities(p1, b: Sequence) -> IdentityReport:
    """Check the price-mean / increment-mean identities in exact arithmetic.

    With prices P_1..P_N built from P_1 and increments b (indexed 2..N):

        mean(P) = P_1 + (N^2-1)/N * mean(b) - sum(i * b_i)/N
        sum(i * b_i) = -P_1 - N mean(P) + (N+1) P_N
    """
    p1 = Fraction(p1)
    b = [Fraction(x) for x in b]
    n = len(b) + 1
    prices = [p1]
    for d in b:
        prices.append(prices[-1] + d)
    price_mean = sum(prices) / n
    weighted = sum(i * d for i, d in enumerate(b, start=2))
    if b:
        inc_mean = sum(b) / (n - 1)
        from_inc = p1 + Fraction(n * n - 1, n) * inc_mean - weighted / n
    else:
        inc_mean = None
        from_inc = p1
    from_prices = -p1 - n * price_mean + (n + 1) * prices[-1]
    report = IdentityReport(n, price_mean, inc_mean, from_inc, weighted, from_prices)
    if not report.holds:
        raise AssertionError(f"price-mean identities violated: {report}")
    return report


def _check_sigma(sigma: float) -> None:
    if not sigma > 0:
        raise ValueError(f"standard deviation must be positive, got {sigma}")


def gaussian_cdf(x: float, mean: float, sigma: float) -> float:
    """P(X <= x) for X ~ Gaussian(mean, sigma)."""
    _check_sigma(sigma)
    if x == math.inf:
        return 1.0
    if x == -math.inf:
        return 0.0
    return 0.5 * math.erfc(-(x - mean) / (sigma * math.sqrt(2.0)))


def gaussian_sf(x: float, mean: float, sigma: float) -> float:
    """P(X > x), accurate far into the upper tail."""
    _check_sigma(sigma)
    if x == math.inf:
        return 0.0
    if x == -math.inf:
        return 1.0
    return 0.5 * math.erfc((x - mean) / (sigma * math.sqrt(2.0)))


def interval_prob(lo: float, hi: float, mean: float, sigma: float) -> float:
    """P(lo < X <= hi), computed on whichever side of the mean avoids cancellation."""
    if hi < lo:
        raise ValueError(f"empty interval ({lo}, {hi}]")
    if lo >= mean:
        return gaussian_sf(lo, mean, sigma) - gaussian_sf(hi, mean, sigma)
    if hi <= mean:
        return gaussian_cdf(hi, mean, sigma) - gaussian_cdf(lo, mean, sigma)
    return 1.0 - gaussian_cdf(lo, mean, sigma) - gaussian_sf(hi, mean, sigma)


@dataclass(frozen=True)
class TailRisk:
    deviation: float  # in standard deviations
    gaussian_tail: float
    frequency: float
    ratio: float


def tail_risk(extreme: float, mean: float, sigma: float, n: int, occurrences: int = 1) -> TailRisk:
    """Gaussian probability of a deviation at least as large as ``extreme``,
    against its observed frequency ``occurrences / n``."""
    tail = gaussian_sf(extreme, mean, sigma) if extreme >= mean else gaussian_cdf(extreme, mean, sigma)
    freq = occurrences / n
    return TailRisk(abs(extreme - mean) / sigma, tail, freq, freq / tail)


@dataclass(frozen=True)
class BinnedSample:
    edges: tuple[float, ...]  # bins are (edges[j], edges[j+1]]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.edges) != len(self.counts) + 1:
            raise ValueError("need one more edge than counts")
        if any(e1 <= e0 for e0, e1 in zip(self.edges, self.edges[1:])):
            raise ValueError("bin edges must be strictly increasing")

    @property
    def total(self) -> int:
        return sum(self.counts)

    @classmethod
    def from_values(cls, values, edges) -> "BinnedSample":
        edges = tuple(float(e) for e in edges)
        idx = np.searchsorted(np.asarray(edges), np.asarray(values, dtype=float), side="left") - 1
        if np.any(idx < 0) or np.any(idx >= len(edges) - 1):
            raise ValueError("values fall outside the outer bin edges")
        counts = np.bincount(idx, minlength=len(edges) - 1)
        return cls(edges, tuple(int(c) for c in counts))


# Upper critical values of the chi-square distribution, keyed by (p, dof).
CHI2_CRITICAL = {
    (p, d + 1): v
    for p, row in {
        0.1: (2.706, 4.605, 6.251, 7.779, 9.236, 10.645, 12.017, 13.362, 14.684, 15.987),
        0.05: (3.841, 5.991, 7.815, 9.488, 11.070, 12.592, 14.067, 15.507, 16.919, 18.307),
        0.025: (5.024, 7.378, 9.348, 11.143, 12.833, 14.449, 16.013, 17.535, 19.023, 20.483),
        0.01: (6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090, 21.666, 23.209),
        0.005: (7.879, 10.597, 12.838, 14.860, 16.750, 18.548, 20.278, 21.955, 23.589, 25.188),
        0.001: (10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877, 29.588),
    }.items()
    for d, v in enumerate(row)
}


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    terms: tuple[float, ...]
    expected: tuple[float, ...]
    level: float | None = None
    critical: float | None = None

    @property
    def reject(self) -> bool | None:
        if self.critical is None:
            return None
        return self.statistic > self.critical

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reject"] = self.reject
        return d


def pearson_chi2(binned: BinnedSample | Sequence[int], probs: Sequence[float], level: float | None = 0.005,
                 dof: int | None = None, critical: float | None = None) -> ChiSquareResult:
    """Pearson statistic sum (n_j - p_j N)^2 / (p_j N).

    ``dof`` defaults to bins - 1. The critical value comes from
    ``critical`` when given, else an exact lookup in ``CHI2_CRITICAL``.
    """
    counts = binned.counts if isinstance(binned, BinnedSample) else tuple(int(c) for c in binned)
    probs = tuple(float(p) for p in probs)
    if len(counts) != len(probs):
        raise ValueError("counts and probabilities differ in length")
    if abs(math.fsum(probs) - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {math.fsum(probs)}, not 1")
    total = sum(counts)
    expected = tuple(p * total for p in probs)
    for j, e in enumerate(expected):
        if not e > 0:
            raise ValueError(f"bin {j} has zero expected count")
    terms = tuple((n - e) ** 2 / e for n, e in zip(counts, expected))
    dof = len(counts) - 1 if dof is None else dof
    if critical is None and level is not None:
        critical = CHI2_CRITICAL.get((level, dof))
        if critical is None:
            raise ValueError(f"no tabulated critical value for level {level}, dof {dof}; pass critical explicitly")
    return ChiSquareResult(math.fsum(terms), dof, terms, expected, level, critical)


def gaussian_class_probs(edges: Sequence[float], mean: float, sigma: float) -> list[float]:
    return [interval_prob(lo, hi, mean, sigma) for lo, hi in zip(edges, edges[1:])]


@dataclass(frozen=True)
class LogReturnClasses:
    binned: BinnedSample
    mean: float
    std: float
    probs: tuple[float, ...]
    expected: tuple[float, ...]
    terms: tuple[float, ...]

    @property
    def statistic(self) -> float:
        return math.fsum(self.terms)


def log_returns(m: Sequence[int]) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0):
        bad = int(np.argmax(m <= 0))
        raise ValueError(f"non-positive lattice index {m[bad]:g} at position {bad}")
    return np.diff(np.log(m))


def logreturn_classes(m: Sequence[int], edges: Sequence[float], mean: float | None = None,
                      std: float | None = None) -> LogReturnClasses:
    """Bin log-returns of a lattice price path and compare with a Gaussian.

    The Gaussian mean and standard deviation default to the sample
    estimates. Outer edges may be infinite.
    """
    r = log_returns(m)
    binned = BinnedSample.from_values(r, edges)
    if mean is None or std is None:
        s = sample_moments(r)
        mean = s.mean if mean is None else mean
        std = s.std if std is None else std
    probs = tuple(gaussian_class_probs(binned.edges, mean, std))
    total = binned.total
    expected = tuple(p * total for p in probs)
    terms = tuple(chi2_term(n, e) for n, e in zip(binned.counts, expected))
    return LogReturnClasses(binned, mean, std, probs, expected, terms)


def chi2_term(observed: float, expected: float) -> float:
    if not expected > 0:
        return math.inf if observed else 0.0
    return (observed - expected) ** 2 / expected


@dataclass(frozen=True)
class ValueArea:
    left: float
    mean: float
    right: float


def value_area(histogram: Mapping[float, int], fraction: float = 0.15) -> ValueArea:
    """Levels where the cumulative mass from each side first reaches ``fraction``."""
    if not 0 < fraction < 0.5:
        raise ValueError(f"fraction must be in (0, 0.5), got {fraction}")
    items = sorted((lvl, c) for lvl, c in histogram.items() if c > 0)
    if not items:
        raise ValueError("empty histogram")
    total = sum(c for _, c in items)
    target = fraction * total

    def first_reaching(seq):
        acc = 0
        for lvl, c in seq:
            acc += c
            if acc >= target:
                return lvl
        return seq[-1][0]

    mean = math.fsum(l * c for l, c in items) / total
    return ValueArea(first_reaching(items), mean, first_reaching(items[::-1]))


@dataclass(frozen=True)
class OlsFit:
    slope: float
    slope_hw: float
    intercept: float
    intercept_hw: float | None  # None when the intercept is forced to zero
    r: float
    n: int
    confidence: float
    forced_zero: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def ols(x, y, force_zero_intercept: bool = False, confidence: float = 0.95) -> OlsFit:
    """Least squares line with two-sided t half-widths.

    Free intercept uses n-2 residual degrees of freedom; forced zero
    intercept uses n-1 and reports the uncentered correlation
    sum(xy)/sqrt(sum(x^2) sum(y^2)), as spreadsheet regression tools do.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n != len(y):
        raise ValueError("x and y differ in length")
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    if np.all(x == x[0]):
        raise ValueError("degenerate regression: all x values are equal")
    if force_zero_intercept:
        sxx = float(np.dot(x, x))
        slope = float(np.dot(x, y)) / sxx
        resid = y - slope * x
        dof = n - 1
        s2 = float(np.dot(resid, resid)) / dof
        se = math.sqrt(s2 / sxx)
        syy = float(np.dot(y, y))
        r = float(np.dot(x, y)) / math.sqrt(sxx * syy) if syy > 0 else 0.0
        t = t_quantile(confidence, dof)
        return OlsFit(slope, t * se, 0.0, None, r, n, confidence, True)
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    slope = float(np.dot(dx, dy)) / sxx
    intercept = float(ym - slope * xm)
    resid = y - intercept - slope * x
    dof = n - 2
    s2 = float(np.dot(resid, resid)) / dof
    se_slope = math.sqrt(s2 / sxx)
    se_int = math.sqrt(s2 * (1.0 / n + xm * xm / sxx))
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy) if syy > 0 else 0.0
    r = max(-1.0, min(1.0, r))
    t = t_quantile(confidence, dof)
    return OlsFit(slope, t * se_slope, intercept, t * se_int, r, n, confidence, False)
