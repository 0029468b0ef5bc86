import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from tapestats.cli import main
from tapestats.latticedist import RankFrequency

FOUR_TICKS = """\
2016-04-04 08:30:00,354.00,2
2016-04-04 08:30:03,354.25,1
2016-04-04 08:30:03,354.00,5
2016-04-04 08:30:10,354.50,1
"""


def write(path, text):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


def read_tsv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


@pytest.fixture
def four_tick(tmp_path):
    write(tmp_path / "ticks" / "a.csv", FOUR_TICKS)
    cfg = write(tmp_path / "run.cfg", "delta = 0.25\ninput = ticks/*.csv\nanalyses = moments\n")
    return tmp_path, cfg


def test_moments_only_on_four_ticks(four_tick):
    tmp, cfg = four_tick
    assert run("analyze", "--config", cfg, "--out", tmp / "out") == 0
    rep = json.load(open(tmp / "out" / "report.json"))
    assert rep["schema_version"] == 1
    assert rep["analyses"] == ["moments"]
    assert set(rep) >= {"moments", "sessions", "inputs"}
    assert "ranks" not in rep and "mps" not in rep
    [sess] = rep["moments"]["sessions"]
    assert "pooled_b" not in rep["moments"]
    b = sess["b"]
    assert b["n"] == 3
    assert b["mean"] == pytest.approx(2 / 3)
    assert sess["identities_hold"] and sess["reconstruction_exact"]
    assert rep["sessions"] == [{"id": sess["id"], "ticks": 4, "volume": 9}]


def test_missing_config_exit_two(tmp_path, capsys):
    missing = tmp_path / "nope.cfg"
    assert run("analyze", "--config", missing, "--out", tmp_path / "o") == 2
    assert str(missing) in capsys.readouterr().err


def test_missing_input_glob_exit_two(tmp_path, capsys):
    cfg = write(tmp_path / "run.cfg", "input = absent/*.csv\n")
    assert run("analyze", "--config", cfg, "--out", tmp_path / "o") == 2
    assert os.path.join(str(tmp_path), "absent/*.csv") in capsys.readouterr().err


def test_missing_subcommand_input(tmp_path, capsys):
    missing = tmp_path / "gone.csv"
    assert run("mps", "--input", missing, "--out", tmp_path / "o") == 2
    assert str(missing) in capsys.readouterr().err


def test_parse_error_is_module_tagged(tmp_path, capsys):
    write(tmp_path / "ticks" / "a.csv", "2016-04-04 08:30:00,354.10,1\n")
    cfg = write(tmp_path / "run.cfg", "input = ticks/*.csv\n")
    assert run("analyze", "--config", cfg, "--out", tmp_path / "o") == 1
    err = capsys.readouterr().err
    assert "[tickstore]" in err and "line 1" in err


def test_analysis_error_is_module_tagged(four_tick, capsys):
    tmp, _ = four_tick
    cfg = write(tmp / "w.cfg", "input = ticks/*.csv\nanalyses = waiting\n")
    assert run("analyze", "--config", cfg, "--out", tmp / "o") == 1
    assert "[waiting]" in capsys.readouterr().err


def test_unknown_analysis_rejected(four_tick, capsys):
    tmp, _ = four_tick
    cfg = write(tmp / "bad.cfg", "input = ticks/*.csv\nanalyses = moments, astrology\n")
    assert run("analyze", "--config", cfg, "--out", tmp / "o") == 1
    assert "astrology" in capsys.readouterr().err


def test_synth_short_life(tmp_path):
    cfg = write(tmp_path / "s.cfg", "synth.L = 10\nsynth.A = 0.5\nseed = 3\n")
    assert run("synth", "--config", cfg, "--out", tmp_path / "c") == 0
    man = json.load(open(tmp_path / "c" / "manifest.json"))
    assert len(man["sessions"]) == 9
    assert len(os.listdir(tmp_path / "c" / "ticks")) == 9
    assert man["spec"]["life"]["L"] == 10.0 and man["spec"]["seed"] == 3


def test_invalid_synth_spec(tmp_path, capsys):
    cfg = write(tmp_path / "s.cfg", "synth.p_up = 2\n")
    assert run("synth", "--config", cfg, "--out", tmp_path / "c") == 1
    assert "p_up" in capsys.readouterr().err


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("small")
    cfg = write(tmp / "run.cfg", "seed = 5\nsynth.L = 31\nsynth.A = 0.4\nsynth.D = 0\n"
                                 "input = corpus/ticks/*.csv\nvolume.L = 31\n")
    assert run("synth", "--config", cfg, "--out", tmp / "corpus") == 0
    return tmp, cfg


def test_synth_deterministic(small_corpus, tmp_path):
    tmp, cfg = small_corpus
    assert run("synth", "--config", cfg, "--out", tmp_path / "again") == 0
    a = json.load(open(tmp / "corpus" / "manifest.json"))
    b = json.load(open(tmp_path / "again" / "manifest.json"))
    assert [s["sha256"] for s in a["sessions"]] == [s["sha256"] for s in b["sessions"]]
    assert open(tmp / "corpus" / "manifest.json").read() == open(tmp_path / "again" / "manifest.json").read()


def test_analyze_byte_identical(small_corpus):
    tmp, cfg = small_corpus
    texts = []
    for out, workers in (("r1", 1), ("r2", 1), ("r3", 2)):
        assert run("analyze", "--config", cfg, "--out", tmp / out, "--workers", workers) == 0
        texts.append(open(tmp / out / "report.json").read())
    assert texts[0] == texts[1] == texts[2]


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    # 200-session corpus with the default generator settings
    tmp = tmp_path_factory.mktemp("full")
    cfg = write(tmp / "run.cfg", "seed = 11\ninput = corpus/ticks/*.csv\n")
    assert run("synth", "--config", cfg, "--out", tmp / "corpus") == 0
    assert run("analyze", "--config", cfg, "--out", tmp / "out") == 0
    rep = json.load(open(tmp / "out" / "report.json"))
    man = json.load(open(tmp / "corpus" / "manifest.json"))
    return tmp, rep, man


def test_full_pipeline_sections(full_run):
    _, rep, man = full_run
    for name in ("moments", "logreturns", "ranks", "waiting", "mps", "depstats", "extremes", "volume"):
        assert name in rep, name
        assert "skipped" not in rep[name], name
    assert len(rep["sessions"]) == len(man["sessions"]) == 200
    assert rep["depstats"]["report"]["n"] == sum(s["ticks"] - 1 for s in rep["sessions"])


def test_session_ids_cross_reference(full_run):
    tmp, rep, man = full_run
    ids = [s["id"] for s in rep["sessions"]]
    assert len(set(ids)) == len(ids)
    assert [s["date"] for s in man["sessions"]] == [i.split("/")[0] for i in ids]
    assert [s["id"] for s in rep["moments"]["sessions"]] == ids
    assert [s["id"] for s in rep["waiting"]["sessions"]] == ids
    assert [s["id"] for s in rep["mps"]["sessions"]] == ids
    out = tmp / "out"
    assert [r["session"] for r in read_tsv(out / "extremes.tsv")] == ids
    assert {r["session"] for r in read_tsv(out / "mps_spectra.tsv")} <= set(ids)
    series = read_tsv(out / "series.tsv")
    assert len(series) == sum(s["ticks"] for s in rep["sessions"])
    assert {r["session"] for r in series} == set(ids)


def test_manifest_round_trips_through_fitters(full_run):
    _, rep, man = full_run
    spec = man["spec"]
    assert rep["waiting"]["a"] == spec["wait"]["a"]
    assert rep["ranks"]["weighted"]["S"] == pytest.approx(spec["S"], rel=0.05)
    fit = rep["volume"]["fit"]["params"]
    for k in ("A", "B", "D"):
        assert fit[k] == pytest.approx(spec["life"][k], rel=0.10), k


def test_tsv_outputs_reload(full_run, tmp_path):
    tmp, rep, _ = full_run
    out = tmp / "out"
    with open(out / "abs_ranks.tsv") as fh:
        rf = RankFrequency.read_tsv(fh)
    assert rf.total == rep["ranks"]["total"]
    for name in os.listdir(out):
        if name.endswith(".tsv"):
            rows = read_tsv(out / name)
            assert rows, name
    # rank table feeds the rank fitter, tick files feed mps and depstats
    assert run("fit-ranks", "--input", out / "abs_ranks.tsv", "--weighted", "--out", tmp_path / "fr") == 0
    got = json.load(open(tmp_path / "fr" / "rank_fit.json"))["fit"]
    assert got["S"] == rep["ranks"]["weighted"]["S"]
    ticks = sorted((tmp / "corpus" / "ticks").iterdir())[:5]
    assert run("mps", "--input", *ticks, "--costs", "0,5,25", "--out", tmp_path / "m") == 0
    sweep = json.load(open(tmp_path / "m" / "mps.json"))["sessions"]
    assert len(sweep) == 5 and [s["id"] for s in sweep] == [s["id"] for s in rep["mps"]["sessions"][:5]]
    assert run("depstats", "--input", *ticks, "--out", tmp_path / "d") == 0
    assert json.load(open(tmp_path / "d" / "depstats.json"))["report"]["n"] > 0
    vol = np.loadtxt(tmp / "corpus" / "lifecycle.tsv", skiprows=1)
    assert vol.shape == (200, 2)
    assert run("fit-volume", "--input", tmp / "corpus" / "lifecycle.tsv", "--lifespan", "201",
               "--out", tmp_path / "v") == 0
    assert json.load(open(tmp_path / "v" / "volume_fit.json"))["fit"]["params"]["B"] == pytest.approx(1.0, rel=0.1)


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "tapestats.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("analyze", "synth", "mps", "fit-volume", "fit-ranks", "depstats"):
        assert cmd in res.stdout
