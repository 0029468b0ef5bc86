"""Generate a 200-day synthetic corpus, run the full analysis on it and
compare the recovered laws with the generating ones.

    python3 demos/round_trip.py [output-dir]
"""
import json
import os
import sys
import tempfile

from tapestats.cli import analyze, synth
from tapestats.config import parse_config

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="tapestats-")
cfg = parse_config("seed = 42\ninput = corpus/ticks/*.csv\n", out)
manifest = synth(cfg, os.path.join(out, "corpus"))
analyze(cfg, os.path.join(out, "report"))
with open(os.path.join(out, "report", "report.json")) as fh:
    rep = json.load(fh)

spec = manifest["spec"]
print(f"{len(manifest['sessions'])} sessions written under {out}")
print(f"rank law S: generated {spec['S']}, weighted fit {rep['ranks']['weighted']['S']:.3f}")
print(f"waiting-time shape a: generated {spec['wait']['a']}, selected {rep['waiting']['a']}")
fit = rep["volume"]["fit"]["params"]
for k in ("A", "B", "D"):
    print(f"life curve {k}: generated {spec['life'][k]}, fitted {fit[k]:.4g}")
dep = rep["depstats"]["report"]
print(f"independence: L={dep['L']:.4f} vs eps_L={dep['eps_L']:.4f}, reject={dep['reject_L']}")
