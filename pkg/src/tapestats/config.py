"""Key = value run configuration.

Example::

    delta = 0.25
    range.day = 08:30:00-13:15:00
    range.overnight = 19:00:00-07:45:00
    limit.2016-04-04 = 354.00, 25.00
    input = data/*.csv
    analyses = moments, ranks, mps
    mps.costs = 0, 5, 25
    synth.S = 4.0

Blank lines and ``#`` comments are ignored; later keys override earlier ones.
"""
from __future__ import annotations

import glob
import os
from dataclasses import dataclass, field
from datetime import date, datetime, time
from decimal import Decimal

from .tickstore import LatticeSpec, LimitBand, SessionWindow

ALL_ANALYSES = (
    "moments", "logreturns", "ranks", "waiting", "mps", "depstats", "extremes", "volume",
)


class ConfigError(ValueError):
    pass


def read_pairs(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _floats(v: str) -> list[float]:
    return [float(x) for x in v.replace(",", " ").split()]


def _time(v: str) -> time:
    return datetime.strptime(v.strip(), "%H:%M:%S").time()


@dataclass
class RunConfig:
    values: dict
    base_dir: str = "."
    lattice: LatticeSpec = field(default_factory=lambda: LatticeSpec(Decimal("0.25")))
    windows: list = field(default_factory=list)
    limits: dict = field(default_factory=dict)  # date or "default" -> (settle, limit) as Decimals
    analyses: tuple = ALL_ANALYSES
    seed: int = 0

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def getfloat(self, key: str, default: float | None = None) -> float | None:
        v = self.values.get(key)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {v!r}") from None

    def getfloats(self, key: str, default=()) -> list[float]:
        v = self.values.get(key)
        return list(default) if v is None else _floats(v)

    def band_for(self, day: date | None) -> LimitBand | None:
        pair = self.limits.get(day.isoformat() if day else None) or self.limits.get("default")
        if pair is None:
            return None
        return LimitBand.from_prices(pair[0], pair[1], self.lattice)

    def input_paths(self, pattern: str | None = None) -> list[str]:
        pattern = pattern or self.values.get("input")
        if not pattern:
            return []
        paths = []
        for part in pattern.split(","):
            part = part.strip()
            full = part if os.path.isabs(part) else os.path.join(self.base_dir, part)
            hits = sorted(glob.glob(full))
            if not hits:
                raise FileNotFoundError(full)
            paths.extend(hits)
        return paths


def parse_config(text: str, base_dir: str = ".", source: str = "<config>") -> RunConfig:
    vals = read_pairs(text, source)
    cfg = RunConfig(vals, base_dir)
    try:
        if "delta" in vals:
            cfg.lattice = LatticeSpec(Decimal(vals["delta"]))
        for k, v in vals.items():
            if k.startswith("range."):
                label = k.split(".", 1)[1]
                lo, hi = v.split("-")
                cfg.windows.append(SessionWindow(label, _time(lo), _time(hi)))
            elif k.startswith("limit."):
                key = k.split(".", 1)[1]
                settle, lim = [Decimal(x.strip()) for x in v.split(",")]
                cfg.limits[key] = (settle, lim)
        if "analyses" in vals:
            sel = tuple(a.strip() for a in vals["analyses"].split(",") if a.strip())
            unknown = [a for a in sel if a not in ALL_ANALYSES]
            if unknown:
                raise ConfigError(f"unknown analyses {unknown}; choose from {ALL_ANALYSES}")
            cfg.analyses = sel
        if "seed" in vals:
            cfg.seed = int(vals["seed"])
    except (ValueError, ArithmeticError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, os.path.dirname(os.path.abspath(path)), path)
