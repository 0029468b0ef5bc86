"""Command line entry point.

    tapestats analyze --config run.cfg --out report/ [--sessions 'data/*.csv'] [--seed 1]
    tapestats synth --config synth.cfg --out corpus/ [--seed 1]
    tapestats mps --input ticks.csv --costs 0,5,25 --out mps/
    tapestats fit-volume --input volume.tsv --lifespan 730 --out fit/
    tapestats fit-ranks --input ranks.tsv --out fit/
    tapestats depstats --input ticks.csv --out dep/
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, is_dataclass
from datetime import date, datetime, time
from decimal import Decimal

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_config
from .depstats import REFERENCE_BASELINE_VARIANCE, dependence_statistics, dloglog_fit, variance_slices
from .extremes import fit_ftg2, session_extremes
from .latticedist import (KumaParams, RankFrequency, fit_loglog, fit_waiting_two_step, kuma_curve,
                          kuma_moments, weibull_moment_curve)
from .lifecurve import LifeCurveParams, curve_table, fit_chebyshev, v_eval
from .moments import (BinnedSample, gaussian_class_probs, logreturn_classes, ols, pearson_chi2,
                      price_mean_identities, sample_moments, value_area)
from .mps import CostModel, cost_sweep, mp_volume_table
from .synth import GeneratorSpec, generate_corpus, generate_lifecycle, session_csv
from .tickstore import LatticeSpec, LimitBand, TapeError, TickParser, increment_sets

SCHEMA_VERSION = 1
log = logging.getLogger("tapestats")


class ModuleError(RuntimeError):
    def __init__(self, module: str, exc: Exception):
        self.module = module
        super().__init__(f"[{module}] {exc}")


# output helpers ------------------------------------------------------------

def _clean(obj):
    """JSON-ready copy with floats at 9 significant digits."""
    if is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_dict() if hasattr(obj, "to_dict") else asdict(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.9g}")
    if isinstance(obj, (Decimal, date, datetime, time)):
        return str(obj)
    return obj


def dump_json(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, sort_keys=True, indent=1)
        fh.write("\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return "" if v is None else str(v)


def write_tsv(path: str, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for r in rows:
            fh.write("\t".join(_fmt(v) for v in r) + "\n")


def write_gnuplot_stub(out: str, files: list[str]) -> None:
    lines = ["# gnuplot stub: one plot per data file", "set datafile separator '\\t'", "set key autotitle columnhead"]
    for f in files:
        lines.append(f"set title '{f}'")
        lines.append(f"plot '{f}' using 1:2 with points")
        lines.append("pause -1")
    with open(os.path.join(out, "plots.gp"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


# analyze -------------------------------------------------------------------

def _load_ranges(cfg: RunConfig, paths: list[str]):
    parser = TickParser(cfg.lattice, cfg.windows)
    ranges, counts = [], []
    for p in paths:
        with open(p) as fh:
            try:
                got = parser.parse(fh)
            except TapeError as exc:
                raise ModuleError("tickstore", f"{p}: {exc}") from None
        ranges.extend(got)
        counts.append({"file": os.path.basename(p), **asdict(parser.counts)})
    ranges.sort(key=lambda r: (r.start, r.label))
    return ranges, counts


def _session_id(r) -> str:
    return f"{r.session.isoformat() if r.session else 'na'}/{r.label}"


def _section(name: str, fn):
    try:
        return fn()
    except ModuleError:
        raise
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        raise ModuleError(name, exc) from exc


def _sweep_job(job):
    m, costs, step = job
    return cost_sweep(m, costs, step)


def _fan_out(fn, jobs, workers: int):
    """Map over sessions, in parallel when asked; results keep input order."""
    if workers <= 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def analyze(cfg: RunConfig, out: str, sessions_glob: str | None = None, seed: int | None = None,
            workers: int = 1) -> dict:
    paths = cfg.input_paths(sessions_glob)
    os.makedirs(out, exist_ok=True)
    ranges, counts = _section("tickstore", lambda: _load_ranges(cfg, paths))
    incs = increment_sets(ranges)
    ids = [_session_id(r) for r in ranges]
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "seed": cfg.seed if seed is None else seed,
        "inputs": counts,
        "sessions": [{"id": i, "ticks": len(r), "volume": r.volume} for i, r in zip(ids, ranges)],
        "analyses": list(cfg.analyses),
    }
    tsv_files = []

    def tsv(name, header, rows):
        write_tsv(os.path.join(out, name), header, rows)
        tsv_files.append(name)

    # tick-index (time-equidistant) price and size series
    tsv("series.tsv", ["tick", "price", "size", "session", "timestamp"],
        [(i, cfg.lattice.price(t.m), t.size, sid, t.timestamp.isoformat())
         for r, sid in zip(ranges, ids) for i, t in enumerate(r.ticks)])

    pooled_b = [x for s in incs for x in s.b]
    pooled_pairs = [(a, b) for s in incs for a, b in zip(s.a, s.b)]

    if "moments" in cfg.analyses:
        def run():
            per = []
            for sid, r, s in zip(ids, ranges, incs):
                entry = {"id": sid, "b": sample_moments(s.b) if s.b else None}
                if r.ticks:
                    ident = price_mean_identities(r.ticks[0].m, s.b)
                    entry["identities_hold"] = ident.holds
                    entry["reconstruction_exact"] = r.ticks[0].m + sum(s.b) == r.ticks[-1].m
                    hist = {}
                    for t in r.ticks:
                        hist[t.m] = hist.get(t.m, 0) + 1
                    va = value_area(hist)
                    entry["value_area"] = {"left": cfg.lattice.price(va.left), "mean": va.mean * float(cfg.lattice.delta),
                                           "right": cfg.lattice.price(va.right)}
                per.append(entry)
            sec = {"sessions": per}
            if pooled_b:
                pm = sample_moments(pooled_b)
                if len(ranges) > 1:
                    sec["pooled_b"] = pm
                hist = Counter(pooled_b)
                tsv("b_epmf.tsv", ["k", "count", "frequency"],
                    [(k, c, c / len(pooled_b)) for k, c in sorted(hist.items())])
                if pm.std:
                    edges = [-math.inf, *cfg.getfloats("moments.chi2_edges", (-1.5, -0.5, 0.5, 1.5)), math.inf]
                    binned = BinnedSample.from_values(pooled_b, edges)
                    probs = gaussian_class_probs(edges, pm.mean, pm.std)
                    try:
                        sec["chi2"] = pearson_chi2(binned, probs, level=0.005)
                    except ValueError as exc:
                        # a class with no Gaussian mass; the data says nothing about the fit there
                        sec["chi2"] = {"skipped": str(exc)}
                    sec["chi2_edges"] = edges
            if len(ranges) >= 3:
                n = [len(r) for r in ranges]
                v = [r.volume for r in ranges]
                if len(set(n)) > 1:
                    sec["volume_vs_ticks"] = {"zero_intercept": ols(n, v, True), "free_intercept": ols(n, v, False)}
                    tsv("volume_vs_ticks.tsv", ["ticks", "volume"], zip(n, v))
            return sec
        report["moments"] = _section("moments", run)

    if "logreturns" in cfg.analyses:
        def run():
            sec = []
            ms = [t.m for r in ranges for t in r.ticks]
            from .moments import log_returns
            lr = log_returns(ms)
            s = sample_moments(lr)
            z = [-3, -2, -1, -0.5, 0.5, 1, 2, 3]
            edges = [-math.inf] + [s.mean + k * s.std for k in z] + [math.inf]
            res = logreturn_classes(ms, edges)
            rows = list(zip(edges, edges[1:], res.binned.counts, res.probs, res.expected, res.terms))
            tsv("logreturn_classes.tsv", ["low", "high", "count", "p", "expected", "chi2_term"], rows)
            return {"mean": res.mean, "std": res.std, "statistic": res.statistic, "classes": rows}
        report["logreturns"] = _section("logreturns", run)

    if "ranks" in cfg.analyses:
        def run():
            rf = RankFrequency.from_values(pooled_b)
            excl = [int(x) for x in cfg.getfloats("ranks.exclude")]
            with open(os.path.join(out, "abs_ranks.tsv"), "w") as fh:
                rf.write_tsv(fh)
            tsv_files.append("abs_ranks.tsv")
            sec = {"total": rf.total, "distinct": len(rf.ranks)}
            for weighted in (False, True):
                fit = fit_loglog(rf, weighted=weighted, exclusions=excl)
                key = "weighted" if weighted else "unweighted"
                sec[key] = fit
                tsv(f"ranks_bilog_{key}.tsv", ["ln_k_plus_q", "ln_frequency", "fitted"], fit.overlay(rf))
            return sec
        report["ranks"] = _section("ranks", run)

    if "waiting" in cfg.analyses:
        def run():
            sums = [(sid, sample_moments(s.a)) for sid, s in zip(ids, incs) if len(s.a) >= 4]
            sums = [(sid, m) for sid, m in sums if m.skewness is not None and m.kurtosis is not None]
            grid = cfg.getfloats("waiting.a_grid", (0.05, 0.1, 0.15, 0.2))
            fit = fit_waiting_two_step([m for _, m in sums], grid)
            tsv("waiting_points.tsv", ["skewness", "kurtosis", "mean", "std"],
                [(m.skewness, m.kurtosis, m.mean, m.std) for _, m in sums])
            rows = [(a, sk, ku) for a, curve in fit.curves.items() for sk, ku in curve]
            tsv("kuma_curves.tsv", ["skewness", "kurtosis", "a"], [(r[1], r[2], r[0]) for r in rows])
            tsv("weibull_curve.tsv", ["skewness", "kurtosis"], weibull_moment_curve(np.geomspace(0.3, 20, 200)))
            sec = fit.to_dict()
            sec["sessions"] = [{"id": sid, "a": m} for sid, m in sums]
            return sec
        report["waiting"] = _section("waiting", run)

    if "mps" in cfg.analyses:
        def run():
            step = cfg.get("mps.step_value", "12.50")
            costs = sorted(CostModel.from_dollars(c, step).cost_cents for c in (cfg.get("mps.costs", "0").replace(",", " ").split()))
            cm = CostModel(costs[0], CostModel.from_dollars(0, step).step_cents)
            sessions = [(r.prices, r.volume) for r in ranges if len(r)]
            sec = {"cost_cents": costs, "sessions": []}
            rows = []
            live = [(sid, r) for sid, r in zip(ids, ranges) if len(r)]
            sweeps = _fan_out(_sweep_job, [(r.prices, costs, cm.step_cents) for _, r in live], workers)
            for (sid, r), sweep in zip(live, sweeps):
                sec["sessions"].append({"id": sid, "sweep": [s.summary() for s in sweep]})
                for s in sweep:
                    rows.extend((sid, s.cost.cost_cents / 100, i, a) for i, a in s.segments())
            tsv("mps_spectra.tsv", ["session", "cost", "tick", "action"], rows)
            if len(sessions) >= 3:
                table = mp_volume_table(sessions, cm)
                sec["mp_vs_volume"] = table
                tsv("mp_vs_volume.tsv", ["mp", "volume"], table.rows)
            return sec
        report["mps"] = _section("mps", run)

    if "depstats" in cfg.analyses:
        def run():
            rep = dependence_statistics(pooled_pairs)
            vs = variance_slices(pooled_pairs)
            tsv("variance_slices.tsv", ["a", "n", "mean", "variance", "skewness", "kurtosis"], vs.slice_rows())
            tsv("variance_intervals.tsv", ["a_left", "a_right", "mean", "min", "max", "std", "skewness", "kurtosis"],
                vs.interval_rows())
            sec = {"report": rep, "slices": len(vs.slices), "intervals": len(vs.intervals),
                   "reference_baseline": REFERENCE_BASELINE_VARIANCE}
            base = vs.baseline.variance if vs.baseline is not None else None
            sec["baseline"] = base
            if base and len(vs.intervals) >= 3:
                try:
                    sec["dloglog"] = dloglog_fit(vs, base)
                except ValueError as exc:
                    sec["dloglog"] = {"skipped": str(exc)}
            return sec
        report["depstats"] = _section("depstats", run)

    if "extremes" in cfg.analyses:
        def run():
            ex = session_extremes([s.b for s in incs], ids)
            tsv("extremes.tsv", ["session", "min", "n_min", "max", "n_max"], ex.table_rows())
            rows = [(k, f, math.log(abs(k)) if k else None, math.log(f)) for k, f in ex.epmf_rows()]
            tsv("extremes_epmf.tsv", ["rank", "frequency", "ln_abs_rank", "ln_frequency"], rows)
            sec = {"sessions": len(ex.sessions), "maxima": ex.maxima, "minima": ex.minima}
            counts = {}
            for s in ex.sessions:
                for v in (s.max, -s.min):
                    if v >= 1:
                        counts[v] = counts.get(v, 0) + 1
            if len(counts) >= 5:
                sec["ftg2"] = fit_ftg2(counts, starts=int(cfg.getfloat("extremes.starts", 20)), seed=report["seed"])
            return sec
        report["extremes"] = _section("extremes", run)

    if "volume" in cfg.analyses:
        def run():
            daily = {}
            for r in ranges:
                daily[r.session] = daily.get(r.session, 0) + r.volume
            days = sorted(daily)
            first = days[0]
            offset = cfg.getfloat("volume.first_tau", 1.0)
            taus = [offset + (d - first).days for d in days]
            L = cfg.getfloat("volume.L", max(taus) + 1)
            C = cfg.getfloat("volume.C", 1.0)
            mode = cfg.get("volume.mode", "integral")
            if mode == "integral":
                # gaps between sessions are non-trading days
                seen = set(int(t) for t in taus)
                skip = [d for d in range(1, int(max(taus)) + 1) if d not in seen]
                obs = list(zip(taus, np.cumsum([daily[d] for d in days])))
                fit = fit_chebyshev(obs, L, C, mode="integral", non_trading=skip)
            else:
                fit = fit_chebyshev(list(zip(taus, [daily[d] for d in days])), L, C)
            rows = [(t, daily[d], v_eval(fit.params, t)) for t, d in zip(taus, days)]
            tsv("life_curve.tsv", ["tau", "volume", "fitted"], rows)
            return {"fit": fit, "days": len(days)}
        report["volume"] = _section("volume", run)

    dump_json(report, os.path.join(out, "report.json"))
    write_gnuplot_stub(out, tsv_files)
    return report


# synth ---------------------------------------------------------------------

def spec_from_config(cfg: RunConfig, seed: int | None = None) -> GeneratorSpec:
    g = cfg.getfloat
    settle = Decimal(cfg.get("synth.settle", "354.00"))
    limit = Decimal(cfg.get("synth.limit", "25.00"))
    band = LimitBand.from_prices(settle, limit, cfg.lattice)
    life = LifeCurveParams(g("synth.A", 0.05), g("synth.B", 1.0), g("synth.C", 1.0), g("synth.D", 0.01), g("synth.L", 201))
    wait = KumaParams(g("synth.kuma_a", 0.1), g("synth.kuma_b", 1.0), 0.0, g("synth.z_max", 300.0))
    start = date.fromisoformat(cfg.get("synth.start_date", "2016-01-04"))
    return GeneratorSpec(cfg.lattice, band, g("synth.Q", 0.89), g("synth.S", 4.0), g("synth.p_up", 0.5), wait, life,
                         cfg.seed if seed is None else seed, g("synth.mean_size", 1.0), start,
                         zero_steps=cfg.get("synth.zero_steps", "false").lower() == "true")


def synth(cfg: RunConfig, out: str, seed: int | None = None) -> dict:
    spec = spec_from_config(cfg, seed)
    os.makedirs(os.path.join(out, "ticks"), exist_ok=True)
    corpus = generate_corpus(spec)
    entries = []
    for s in corpus.sessions:
        name = os.path.join("ticks", f"{s.session.isoformat()}.csv")
        with open(os.path.join(out, name), "w") as fh:
            fh.write(session_csv(s, spec.lattice))
        entries.append({"date": s.session.isoformat(), "file": name, "ticks": len(s), "volume": s.volume,
                        "sha256": corpus.checksums[s.session.isoformat()]})
    vol = generate_lifecycle(spec)
    write_tsv(os.path.join(out, "lifecycle.tsv"), ["tau", "volume"], enumerate(vol.tolist(), start=1))
    manifest = {"schema_version": SCHEMA_VERSION, "spec": spec.to_dict(), "sessions": entries}
    dump_json(manifest, os.path.join(out, "manifest.json"))
    return manifest


# small subcommands ------------------------------------------------------------

def _ranges_from_files(paths, delta):
    cfg = parse_config(f"delta = {delta}")
    return _load_ranges(cfg, paths)[0]


def cmd_mps(args) -> dict:
    ranges = _ranges_from_files(args.input, args.delta)
    step = CostModel.from_dollars(0, args.step_value).step_cents
    costs = sorted(CostModel.from_dollars(c, args.step_value).cost_cents for c in args.costs.split(","))
    os.makedirs(args.out, exist_ok=True)
    result, rows = [], []
    for r in ranges:
        sweep = cost_sweep(r.prices, costs, step, args.single_episode)
        result.append({"id": _session_id(r), "sweep": [s.summary() for s in sweep]})
        rows.extend((_session_id(r), s.cost.cost_cents / 100, i, a) for s in sweep for i, a in s.segments())
    write_tsv(os.path.join(args.out, "mps_spectra.tsv"), ["session", "cost", "tick", "action"], rows)
    out = {"schema_version": SCHEMA_VERSION, "sessions": result}
    dump_json(out, os.path.join(args.out, "mps.json"))
    return out


def cmd_fit_volume(args) -> dict:
    rows = np.loadtxt(args.input, delimiter="\t", skiprows=1, ndmin=2)
    obs = [(float(t), float(v)) for t, v in rows[:, :2] if 0 < t < args.lifespan]
    if args.mode == "integral":
        obs = list(zip([t for t, _ in obs], np.cumsum([v for _, v in obs]).tolist()))
    fit = fit_chebyshev(obs, args.lifespan, args.birth_exponent, mode=args.mode)
    os.makedirs(args.out, exist_ok=True)
    dump_json({"schema_version": SCHEMA_VERSION, "fit": fit}, os.path.join(args.out, "volume_fit.json"))
    taus = [t for t, _ in obs]
    write_tsv(os.path.join(args.out, "life_curve.tsv"), ["tau", "V", "Vc"], curve_table(fit.params, taus))
    return {"fit": fit}


def cmd_fit_ranks(args) -> dict:
    with open(args.input) as fh:
        rf = RankFrequency.read_tsv(fh)
    excl = [int(x) for x in args.exclude.split(",")] if args.exclude else []
    fit = fit_loglog(rf, weighted=args.weighted, exclusions=excl)
    os.makedirs(args.out, exist_ok=True)
    dump_json({"schema_version": SCHEMA_VERSION, "fit": fit}, os.path.join(args.out, "rank_fit.json"))
    write_tsv(os.path.join(args.out, "ranks_bilog.tsv"), ["ln_k_plus_q", "ln_frequency", "fitted"], fit.overlay(rf))
    return {"fit": fit}


def cmd_depstats(args) -> dict:
    ranges = _ranges_from_files(args.input, args.delta)
    pairs = [(a, b) for s in increment_sets(ranges) for a, b in zip(s.a, s.b)]
    rep = dependence_statistics(pairs)
    vs = variance_slices(pairs)
    os.makedirs(args.out, exist_ok=True)
    write_tsv(os.path.join(args.out, "variance_slices.tsv"), ["a", "n", "mean", "variance", "skewness", "kurtosis"],
              vs.slice_rows())
    out = {"schema_version": SCHEMA_VERSION, "report": rep}
    dump_json(out, os.path.join(args.out, "depstats.json"))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tapestats", description="Time & Sales lattice statistics")
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="full report from tick files")
    a.add_argument("--config", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--sessions", help="glob overriding the configured input")
    a.add_argument("--seed", type=int)
    a.add_argument("--workers", type=int, default=1, help="processes for per-session work")

    s = sub.add_parser("synth", help="write a synthetic tick corpus")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)

    m = sub.add_parser("mps", help="maximum profit strategy cost sweep")
    m.add_argument("--input", required=True, nargs="+")
    m.add_argument("--delta", default="0.25")
    m.add_argument("--costs", default="0")
    m.add_argument("--step-value", default="12.50")
    m.add_argument("--single-episode", action="store_true")
    m.add_argument("--out", required=True)

    v = sub.add_parser("fit-volume", help="minimax life-curve fit of daily volumes")
    v.add_argument("--input", required=True, help="TSV with header: tau, volume")
    v.add_argument("--lifespan", type=float, required=True)
    v.add_argument("--birth-exponent", type=float, default=1.0)
    v.add_argument("--mode", choices=("differential", "integral"), default="differential")
    v.add_argument("--out", required=True)

    r = sub.add_parser("fit-ranks", help="log-log rank-law fit")
    r.add_argument("--input", required=True, help="TSV with header: rank, count, frequency")
    r.add_argument("--weighted", action="store_true")
    r.add_argument("--exclude", default="")
    r.add_argument("--out", required=True)

    d = sub.add_parser("depstats", help="waiting-time / price-increment dependence")
    d.add_argument("--input", required=True, nargs="+")
    d.add_argument("--delta", default="0.25")
    d.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        for attr in ("config", "input"):
            val = getattr(args, attr, None)
            for path in ([val] if isinstance(val, str) else val or []):
                if not os.path.exists(path):
                    print(f"error: input not found: {path}", file=sys.stderr)
                    return 2
        if args.command == "analyze":
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
            analyze(cfg, args.out, args.sessions, args.seed, args.workers)
        elif args.command == "synth":
            cfg = load_config(args.config)
            synth(cfg, args.out, args.seed)
        elif args.command == "mps":
            cmd_mps(args)
        elif args.command == "fit-volume":
            cmd_fit_volume(args)
        elif args.command == "fit-ranks":
            cmd_fit_ranks(args)
        elif args.command == "depstats":
            cmd_depstats(args)
    except FileNotFoundError as exc:
        print(f"error: input not found: {exc.filename or exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 1
    except ModuleError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, TapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
