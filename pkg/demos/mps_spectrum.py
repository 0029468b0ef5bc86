"""Maximum profit strategies on one synthetic session across transaction
costs: profit falls and trades thin out until doing nothing is best.

    python3 demos/mps_spectrum.py
"""
from decimal import Decimal

from tapestats.latticedist import KumaParams
from tapestats.lifecurve import LifeCurveParams
from tapestats.mps import CostModel, cost_sweep, total_variation
from tapestats.synth import GeneratorSpec, generate_session
from tapestats.tickstore import LatticeSpec, LimitBand

lat = LatticeSpec(Decimal("0.25"))
spec = GeneratorSpec(lat, LimitBand.from_prices(Decimal("354.00"), Decimal("25.00"), lat),
                     Q=0.89, S=2.5, p_up=0.5, wait=KumaParams(0.1, 1.0, 0.0, 300.0),
                     life=LifeCurveParams(0.5, 1.0, 1.0, 0.0, 41.0), seed=3)
session = generate_session(spec, 20)
m = session.prices
print(f"{len(m)} ticks, total variation {total_variation(m)} steps")

costs = [CostModel.from_dollars(c).cost_cents for c in ("0", "5", "12.50", "25", "50", "100", "199.99", "500")]
for s in cost_sweep(m, costs):
    print(f"cost ${s.cost.cost_cents / 100:>7.2f}: MP ${s.mp:>9.2f}, {s.transactions:3d} contracts traded, "
          f"entry {s.entry}, exit {s.exit}")
