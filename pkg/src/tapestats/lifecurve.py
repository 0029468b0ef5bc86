"""Daily volume life curve V(τ) = A (L-τ)^B τ^C e^(Dτ).

Evaluation, derivatives of any order through the relative growth rate
G = V'/V, the location of the maximum and inflection points, cumulative
volume in closed form (integer C) or as a beta-function series, and a
minimax fit.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize

from .special import inc_beta, upper_gamma, upper_gamma_diff

__all__ = [
    "LifeCurveParams", "CurveShape", "ChebyshevFit", "v_eval", "v_derivative", "g_eval",
    "g_derivative", "shape", "upper_gamma", "inc_beta", "vc_closed", "vc_series",
    "vc_quad", "vc", "v_array", "fit_chebyshev", "yin_map", "curve_table",
]


@dataclass(frozen=True)
class LifeCurveParams:
    A: float
    B: float
    C: float
    D: float
    L: float

    def __post_init__(self):
        if self.A < 0:
            raise ValueError(f"A must be non-negative, got {self.A}")
        if self.B <= 0 or self.C <= 0:
            raise ValueError(f"B and C must be positive, got B={self.B}, C={self.C}")
        if self.D < 0:
            raise ValueError(f"D must be non-negative, got {self.D}")
        if self.L <= 0:
            raise ValueError(f"L must be positive, got {self.L}")

    def to_dict(self) -> dict:
        return asdict(self)


def _check_tau(p: LifeCurveParams, tau: float) -> None:
    if not 0.0 <= tau <= p.L:
        raise ValueError(f"tau={tau} lies outside [0, {p.L}]")


def v_eval(p: LifeCurveParams, tau: float) -> float:
    _check_tau(p, tau)
    if tau == 0.0 or tau == p.L or p.A == 0.0:
        return 0.0
    return p.A * math.exp(p.B * math.log(p.L - tau) + p.C * math.log(tau) + p.D * tau)


def g_eval(p: LifeCurveParams, tau: float) -> float:
    """Relative growth rate G = V'/V on the open interval."""
    return p.D + p.C / tau - p.B / (p.L - tau)


def g_derivative(p: LifeCurveParams, tau: float, k: int) -> float:
    """k-th derivative of G; k = 0 returns G itself."""
    if k < 0:
        raise ValueError(f"derivative order must be non-negative, got {k}")
    if not 0.0 < tau < p.L:
        raise ValueError(f"G is only defined on (0, {p.L}), got tau={tau}")
    if k == 0:
        return g_eval(p, tau)
    sign = -1.0 if k % 2 else 1.0
    return math.factorial(k) * (sign * p.C / tau ** (k + 1) - p.B / (p.L - tau) ** (k + 1))


def _endpoint_first_derivative(p: LifeCurveParams, tau: float) -> float:
    # near 0: V ~ A L^B tau^C; near L: V ~ A L^C e^(DL) (L - tau)^B
    if p.A == 0.0:
        return 0.0
    if tau == 0.0:
        if p.C < 1.0:
            return math.inf
        return p.A * p.L ** p.B if p.C == 1.0 else 0.0
    if p.B < 1.0:
        return -math.inf
    return -p.A * p.L ** p.C * math.exp(p.D * p.L) if p.B == 1.0 else 0.0


def v_derivative(p: LifeCurveParams, tau: float, order: int = 1) -> float:
    """n-th derivative of V by the Leibniz rule applied to V' = G V.

    At the endpoints order 0 is 0 and order 1 is the one-sided limit
    (0, finite or infinite depending on whether the exponent is above,
    at or below 1). Higher orders are not defined there.
    """
    if order < 0:
        raise ValueError(f"derivative order must be non-negative, got {order}")
    _check_tau(p, tau)
    if order == 0:
        return v_eval(p, tau)
    if tau == 0.0 or tau == p.L:
        if order == 1:
            return _endpoint_first_derivative(p, tau)
        raise ValueError(f"order-{order} derivative is not available at the endpoint tau={tau}")
    g = [g_derivative(p, tau, k) for k in range(order)]
    v = [v_eval(p, tau)]
    for n in range(order):
        v.append(math.fsum(math.comb(n, i) * g[n - i] * v[i] for i in range(n + 1)))
    return v[order]


@dataclass(frozen=True)
class CurveShape:
    tau_max: float
    v_max: float
    M: float | None  # undefined for D == 0
    inflections: tuple[float, ...]


def _tau_max(p: LifeCurveParams) -> float:
    # root of D t^2 - (DL - C - B) t - CL = 0, written without cancellation
    s = p.D * p.L - p.C - p.B
    disc = s * s + 4.0 * p.D * p.C * p.L
    root = math.sqrt(disc)
    if s <= 0:
        return 2.0 * p.C * p.L / (root - s)
    return (s + root) / (2.0 * p.D)


def _inflection_residual(p: LifeCurveParams, tau: float) -> float:
    # V''/V = G' + G^2
    g = g_eval(p, tau)
    return g * g - p.C / tau ** 2 - p.B / (p.L - tau) ** 2


def shape(p: LifeCurveParams, grid: int = 4000) -> CurveShape:
    """Maximum and inflection points.

    Inflections are roots of C(L-τ)^2 + Bτ^2 = (Dτ(L-τ) + C(L-τ) - Bτ)^2,
    located by a scan of V''/V followed by Brent's method.
    """
    t = _tau_max(p)
    if p.D > 0:
        s = p.D * p.L - p.C - p.B
        M = p.C + p.B - math.sqrt(s * s + 4.0 * p.D * p.L * p.C)
        # DL - M = 2D tau_max and DL + M = 2D (L - tau_max)
        v_max = p.A * (p.L - t) ** p.B * t ** p.C * math.exp(p.D * t)
    else:
        M = None
        v_max = v_eval(p, t)

    eps = 1e-9 * p.L
    # denser near the ends where the curvature changes fastest
    u = np.linspace(0.0, 1.0, grid + 1)
    taus = eps + (p.L - 2 * eps) * (0.5 - 0.5 * np.cos(np.pi * u))
    vals = [_inflection_residual(p, x) for x in taus]
    roots = []
    for x0, x1, f0, f1 in zip(taus, taus[1:], vals, vals[1:]):
        if f0 == 0.0:
            roots.append(float(x0))
        elif f0 * f1 < 0:
            r = brentq(lambda x: _inflection_residual(p, x), x0, x1, xtol=1e-14 * p.L)
            # the second derivative must change sign across the root
            h = 1e-7 * p.L
            lo, hi = max(r - h, eps / 2), min(r + h, p.L - eps / 2)
            if _inflection_residual(p, lo) * _inflection_residual(p, hi) < 0:
                roots.append(r)
    return CurveShape(t, v_max, M, tuple(roots))


def vc_closed(p: LifeCurveParams, tau: float) -> float:
    """Cumulative volume ∫_0^τ V for C in {1, 2, 3} via upper incomplete gamma.

    V_c = A e^(DL) Σ_i binom(C, i) (-1)^i L^(C-i) D^-(B+i+1)
          [Γ(B+i+1, D(L-τ)) - Γ(B+i+1, DL)]
    """
    if p.C not in (1, 2, 3):
        raise ValueError(f"closed form needs C in {{1, 2, 3}}, got C={p.C}; use vc_series")
    if not p.D > 0:
        raise ValueError("closed form needs D > 0; use vc_series")
    _check_tau(p, tau)
    if tau == 0.0 or p.A == 0.0:
        return 0.0
    c = int(p.C)
    terms = []
    for i in range(c + 1):
        s = p.B + i + 1
        diff = upper_gamma_diff(s, p.D * (p.L - tau), p.D * p.L)
        terms.append(math.comb(c, i) * (-1) ** i * p.L ** (c - i) * p.D ** (-s) * diff)
    total = math.fsum(terms)
    # the terms cancel by about (L/τ)^(C+1); redo the same sum in extended precision
    # when that would cost more than four of the sixteen digits
    lost = max(abs(t) for t in terms) / abs(total) if total else math.inf
    if lost > 1e4:
        return _vc_closed_mp(p, tau, lost)
    return p.A * math.exp(p.D * p.L) * total


def _vc_closed_mp(p: LifeCurveParams, tau: float, lost: float) -> float:
    import mpmath

    digits = math.log10(p.L / tau) * (p.C + 1) if not math.isfinite(lost) else math.log10(lost)
    with mpmath.workdps(int(digits) + 25):
        A, B, D, L, t = (mpmath.mpf(x) for x in (p.A, p.B, p.D, p.L, tau))
        total = mpmath.fsum(
            math.comb(int(p.C), i) * (-1) ** i * L ** (int(p.C) - i) * D ** (-(B + i + 1))
            * mpmath.gammainc(B + i + 1, D * (L - t), D * L)
            for i in range(int(p.C) + 1)
        )
        return float(A * mpmath.exp(D * L) * total)


def vc_series(p: LifeCurveParams, tau: float, tol: float = 1e-10, max_terms: int = 100_000) -> float:
    """Cumulative volume as A L^(B+C+1) Σ_i (DL)^i/i! B(τ/L; C+i+1, B+1).

    Terms are added until the tail bound A L^(B+C+1) e^(DL) (DL)^(n+1)/(n+1)!
    drops below ``tol`` (every incomplete beta here is at most 1).
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    _check_tau(p, tau)
    if tau == 0.0 or p.A == 0.0:
        return 0.0
    x = tau / p.L
    dl = p.D * p.L
    scale = p.A * p.L ** (p.B + p.C + 1)
    total = []
    coef = 1.0  # (DL)^i / i!
    for i in range(max_terms):
        total.append(coef * inc_beta(x, p.C + i + 1, p.B + 1))
        coef *= dl / (i + 1)
        if scale * math.exp(dl) * coef < tol:
            break
    else:
        raise RuntimeError(f"series did not reach tol={tol} within {max_terms} terms")
    return scale * math.fsum(total)


def vc_quad(p: LifeCurveParams, tau: float) -> float:
    """Cumulative volume by adaptive quadrature, for cross-checks."""
    from scipy.integrate import quad

    _check_tau(p, tau)
    val, _ = quad(lambda t: v_eval(p, t), 0.0, tau, epsabs=0.0, epsrel=1e-13, limit=500)
    return val


def vc(p: LifeCurveParams, tau: float, tol: float = 1e-10) -> float:
    """Closed form where it is accurate, the series elsewhere.

    For τ much smaller than L the binomial terms of the closed form
    cancel by a factor of about (L/τ)^C, so the series is used there.
    """
    if p.C in (1, 2, 3) and p.D > 0 and (p.C == 1 or tau >= 0.1 * p.L):
        return vc_closed(p, tau)
    return vc_series(p, tau, tol)


@dataclass
class ChebyshevFit:
    params: LifeCurveParams
    max_abs_residual: float
    converged: bool
    underdetermined: bool
    evaluations: int
    mode: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        return d


def v_array(p: LifeCurveParams, taus) -> np.ndarray:
    """Vectorized V on the open interval (endpoints give 0)."""
    t = np.asarray(taus, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0) & (t < p.L)
    if p.A > 0:
        ti = t[inside]
        out[inside] = p.A * np.exp(p.B * np.log(p.L - ti) + p.C * np.log(ti) + p.D * ti)
    return out


def _integral_model(p: LifeCurveParams, taus: np.ndarray, skip: np.ndarray, closed: bool) -> np.ndarray:
    if closed:
        return np.array([vc(p, float(t)) for t in taus])
    days = np.arange(1, int(math.floor(taus.max())) + 1)
    daily = np.where(skip[: len(days)], 0.0, v_array(p, days))
    cum = np.concatenate([[0.0], np.cumsum(daily)])
    return cum[np.floor(taus).astype(int)]


def fit_chebyshev(observations: Sequence[tuple[float, float]], L: float, C: float,
                  mode: str = "differential", non_trading: Iterable[int] = (),
                  closed_form: bool = False, starts: int = 9, max_evals: int = 2000,
                  xatol: float = 1e-8) -> ChebyshevFit:
    """Minimax fit of (A, B, D) with L and C held fixed.

    ``mode="differential"`` compares V(τ_j) with daily values.
    ``mode="integral"`` compares cumulative volume: the sum of V over
    integer days up to τ_j with the ``non_trading`` days left out, or
    the exact integral when ``closed_form`` is set.
    Direct search (Nelder-Mead on log A, B, log D) from several starts,
    each restarted from its own optimum until it stops moving.
    """
    if mode not in ("differential", "integral"):
        raise ValueError(f"mode must be 'differential' or 'integral', got {mode!r}")
    obs = np.asarray(observations, dtype=float)
    if obs.ndim != 2 or obs.shape[1] != 2 or len(obs) < 4:
        raise ValueError("need at least 4 (tau, value) observations")
    taus, ys = obs[:, 0], obs[:, 1]
    if np.any(taus <= 0) or np.any(taus >= L):
        raise ValueError(f"all tau must lie strictly inside (0, {L})")
    underdetermined = len(np.unique(taus)) < 3
    skip = np.zeros(int(L) + 2, dtype=bool)
    for d in non_trading:
        if 0 < int(d) < len(skip):
            skip[int(d)] = True
    skip = skip[1:]  # index 0 is day 1
    scale = float(np.max(np.abs(ys))) or 1.0
    evals = 0

    def model(theta) -> np.ndarray:
        p = LifeCurveParams(math.exp(theta[0]), theta[1], C, math.exp(theta[2]), L)
        if mode == "differential":
            return v_array(p, taus)
        return _integral_model(p, taus, skip, closed_form)

    def objective(theta) -> float:
        nonlocal evals
        evals += 1
        if not 1e-6 < theta[1] < 100 or abs(theta[0]) > 700 or not -30 < theta[2] < 5:
            return math.inf
        with np.errstate(over="ignore", invalid="ignore"):
            r = np.max(np.abs(model(theta) - ys)) / scale
        return float(r) if np.isfinite(r) else math.inf

    def start_for(b, d) -> np.ndarray:
        # amplitude from a least-squares match of the unit-amplitude shape
        shape_ = model(np.array([0.0, b, math.log(d)]))
        denom = float(np.dot(shape_, shape_))
        a = float(np.dot(shape_, ys)) / denom if denom > 0 else 1.0
        return np.array([math.log(max(a, 1e-300)), b, math.log(d)])

    grid_b = (0.5, 1.0, 2.0)
    grid_d = (1e-3, 1e-2, 3e-2)
    candidates = [start_for(b, d) for b in grid_b for d in grid_d][:max(1, starts)]
    best_x, best_f, converged = None, math.inf, False
    for x0 in candidates:
        x, f = x0, objective(x0)
        done = False
        for _ in range(8):
            res = minimize(objective, x, method="Nelder-Mead",
                           options={"xatol": xatol, "fatol": 1e-15, "maxfev": max_evals,
                                    "adaptive": False})
            moved = np.max(np.abs(res.x - x))
            x, f_new = res.x, res.fun
            done = moved < xatol or (res.success and f_new >= f)
            f = min(f, f_new)
            if done:
                break
        if f < best_f:
            best_x, best_f, converged = x, f, done
    params = LifeCurveParams(math.exp(best_x[0]), float(best_x[1]), C, math.exp(best_x[2]), L)
    return ChebyshevFit(params, float(best_f * scale), converged and not underdetermined, underdetermined, evals, mode)


def yin_map(t_b: float, t_m: float, t_e: float, c_m: float, delta: float) -> LifeCurveParams:
    """Life-curve parameters equivalent to the beta growth curve with D = 0."""
    if not t_b < t_m < t_e:
        raise ValueError(f"need t_b < t_m < t_e, got {t_b}, {t_m}, {t_e}")
    if c_m <= 0 or delta <= 0:
        raise ValueError("c_m and delta must be positive")
    r = (t_m - t_b) / (t_e - t_m)
    A = c_m * ((t_e - t_m) * (t_m - t_b) ** r) ** (-delta)
    return LifeCurveParams(A, delta, delta * r, 0.0, t_e - t_b)


def curve_table(p: LifeCurveParams, taus: Iterable[float]) -> list[tuple[float, float, float]]:
    """Rows (τ, V, V_c) for plotting."""
    return [(float(t), v_eval(p, float(t)), vc(p, float(t))) for t in taus]
