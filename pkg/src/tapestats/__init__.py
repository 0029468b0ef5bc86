"""Lattice statistics for futures Time & Sales tick data."""

__version__ = "0.1.0"

from .tickstore import LatticeSpec, LimitBand, SessionRange, SessionWindow, Tick, TickParser, increment_sets, parse_ticks
from .moments import ols, pearson_chi2, sample_moments
from .lifecurve import LifeCurveParams, fit_chebyshev, shape, v_eval, vc
from .latticedist import KumaParams, RankFrequency, fit_loglog, fit_waiting_two_step, hz_pmf
from .mps import CostModel, cost_sweep, mps0
from .depstats import dependence_statistics, variance_slices
from .extremes import fit_ftg2, session_extremes
from .synth import GeneratorSpec, generate_corpus
