"""Shape and cumulative volume of a contract life curve, then a minimax
refit from noisy daily volumes.

    python3 demos/life_curve.py
"""
import numpy as np

from tapestats.lifecurve import LifeCurveParams, fit_chebyshev, shape, v_array, vc, vc_quad

p = LifeCurveParams(A=3.71e-3, B=0.783037883, C=1.0, D=0.010327916, L=730.0)
sh = shape(p)
print(f"peak at tau={sh.tau_max:.1f} days, V={sh.v_max:.1f}; inflections at "
      + ", ".join(f"{t:.1f}" for t in sh.inflections))

for tau in (30.0, 365.0, 730.0):
    print(f"cumulative volume to day {tau:.0f}: {vc(p, tau):.6g} (quadrature {vc_quad(p, tau):.6g})")

rng = np.random.default_rng(1)
taus = np.arange(1, 730)
daily = rng.poisson(v_array(p, taus))
fit = fit_chebyshev(list(zip(taus, np.cumsum(daily))), p.L, p.C, mode="integral")
print("refit from Poisson daily volumes:", {k: round(v, 6) for k, v in fit.params.to_dict().items()})
