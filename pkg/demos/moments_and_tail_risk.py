"""Moments of a b-increment histogram, a Gaussian goodness-of-fit test and
how badly the Gaussian underestimates the one large move.

    python3 demos/moments_and_tail_risk.py
"""
import math

from tapestats.moments import gaussian_class_probs, pearson_chi2, sample_moments, tail_risk

# b-increment counts of one overnight session, in lattice steps
hist = {-1: 179, 0: 1792, 1: 191, 2: 1}

s = sample_moments(hist)
print(f"n={s.n} mean={s.mean:.6g} var={s.variance:.6g} std={s.std:.6g} "
      f"skew={s.skewness:.6g} excess kurtosis={s.kurtosis:.6g}")

edges = [-math.inf, -0.5, 0.5, 1.5, math.inf]
probs = gaussian_class_probs(edges, s.mean, s.std)
chi = pearson_chi2([hist[k] for k in sorted(hist)], probs, level=0.005)
print("Gaussian class probabilities:", ", ".join(f"{p:.4g}" for p in probs))
print(f"chi2={chi.statistic:.2f} on {chi.dof} dof, critical {chi.critical} -> reject={chi.reject}")

risk = tail_risk(2, s.mean, s.std, s.n)
print(f"a +2 step is {risk.deviation:.1f} sigma out: Gaussian tail {risk.gaussian_tail:.2g}, "
      f"observed frequency {risk.frequency:.2g}, ratio {risk.ratio:.0f}")
