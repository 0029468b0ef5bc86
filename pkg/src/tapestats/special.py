"""Special functions used across the package.

Upper incomplete gamma, incomplete beta (plain and regularized), the
Student t quantile built on the regularized beta, and the Hurwitz zeta
function summed with an Euler-Maclaurin tail.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

_EPS = 1e-16
_TINY = 1e-300
_MAXITER = 10_000
_GL = np.polynomial.legendre.leggauss(40)


def _gamma_series(s: float, x: float) -> float:
    """Regularized lower incomplete gamma P(s, x) by its power series."""
    term = 1.0 / s
    total = term
    ap = s
    for _ in range(_MAXITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise RuntimeError(f"gamma series did not converge for s={s}, x={x}")
    return total * math.exp(-x + s * math.log(x) - math.lgamma(s))


def _gamma_cf(s: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(s, x) by Lentz's continued fraction."""
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAXITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise RuntimeError(f"gamma continued fraction did not converge for s={s}, x={x}")
    return math.exp(-x + s * math.log(x) - math.lgamma(s)) * h


def gammaincc(s: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(s, x) = Γ(s, x) / Γ(s)."""
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if x == 0:
        return 1.0
    if x < s + 1.0:
        return 1.0 - _gamma_series(s, x)
    return _gamma_cf(s, x)


def upper_gamma(s: float, x: float) -> float:
    """Upper incomplete gamma Γ(s, x) = ∫_x^∞ t^(s-1) e^(-t) dt.

    Series for ``x < s + 1``, continued fraction otherwise.
    """
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if x == 0:
        return math.gamma(s)
    if x < s + 1.0:
        return math.gamma(s) * (1.0 - _gamma_series(s, x))
    return math.exp(math.lgamma(s)) * _gamma_cf(s, x)


def upper_gamma_diff(s: float, x0: float, x1: float) -> float:
    """Γ(s, x0) - Γ(s, x1) = ∫_x0^x1 t^(s-1) e^(-t) dt without subtracting
    two nearly equal upper tails."""
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    if not 0 <= x0 <= x1:
        raise ValueError(f"need 0 <= x0 <= x1, got {x0}, {x1}")
    if x0 == x1:
        return 0.0
    if x0 > 0 and x1 - x0 <= 0.25 * x0:
        # narrow interval: the integrand is smooth there, so Gauss-Legendre beats any difference of tails
        nodes, weights = _GL
        h = 0.5 * (x1 - x0)
        t = x0 + h * (nodes + 1.0)
        return float(h * np.dot(weights, np.exp((s - 1.0) * np.log(t) - t)))
    g = math.gamma(s)
    if x1 < s + 1.0:
        lo = _gamma_series(s, x0) if x0 > 0 else 0.0
        return g * (_gamma_series(s, x1) - lo)
    if x0 >= s + 1.0:
        return g * (_gamma_cf(s, x0) - _gamma_cf(s, x1))
    return upper_gamma(s, x0) - upper_gamma(s, x1)


def _beta_cf(x: float, a: float, b: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAXITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise RuntimeError(f"beta continued fraction did not converge for x={x}, a={a}, b={b}")


def lbeta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def betainc(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError(f"a and b must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log1p(-x) - lbeta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(x, a, b) / a
    return 1.0 - math.exp(log_front) * _beta_cf(1.0 - x, b, a) / b


def inc_beta(x: float, a: float, b: float) -> float:
    """Incomplete beta B(x; a, b) = ∫_0^x t^(a-1) (1-t)^(b-1) dt."""
    if a <= 0 or b <= 0:
        raise ValueError(f"a and b must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    complete = math.exp(lbeta(a, b))
    if x == 1.0:
        return complete
    log_front = a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(x, a, b) / a
    return complete - math.exp(log_front) * _beta_cf(1.0 - x, b, a) / b


def t_quantile(confidence: float, dof: float) -> float:
    """Two-sided Student t critical value: P(|T| <= t) = confidence."""
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    if dof <= 0:
        raise ValueError(f"dof must be positive, got {dof}")
    alpha = 1.0 - confidence
    # P(|T| > t) = I_{dof/(dof+t^2)}(dof/2, 1/2)
    def excess(t: float) -> float:
        return betainc(dof / (dof + t * t), 0.5 * dof, 0.5) - alpha

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
    return brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-15)


# Bernoulli numbers B_2, B_4, B_6, B_8
_BERNOULLI = (1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0)


def hurwitz_zeta(q: float, s: float, m: int = 10_000, order: int = 2) -> float:
    """Hurwitz zeta ζ(q, s) = Σ_{i≥0} (i + q)^(-s) for real q > 0, s > 1.

    ``m`` terms are summed directly; the tail is the Euler-Maclaurin
    integral plus half-term plus ``order`` Bernoulli corrections
    (order 2 stops at the B_4 term).
    """
    if s <= 1.0:
        raise ValueError(f"Hurwitz zeta diverges for s <= 1 (got s={s})")
    if q <= 0.0:
        raise ValueError(f"q must be positive, got {q}")
    head = np.arange(m, dtype=float) + q
    total = math.fsum(np.power(head, -s))
    y = m + q
    tail = y ** (1.0 - s) / (s - 1.0) + 0.5 * y ** (-s)
    # j-th correction: B_2j/(2j)! * s(s+1)...(s+2j-2) * y^(-s-2j+1)
    rising = s
    for j in range(1, order + 1):
        tail += _BERNOULLI[j - 1] / math.factorial(2 * j) * rising * y ** (-s - 2 * j + 1)
        rising *= (s + 2 * j - 1) * (s + 2 * j)
    return total + tail
