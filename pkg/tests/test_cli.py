import json
import math

import numpy as np
import pytest

from ergmphase.cli import build_parser, main
from ergmphase.graph import Graph
from ergmphase.multiplicity import MultiplicityTable, cache_path
from ergmphase.output import config_hash, read_csv


def run(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def data_rows(path):
    return read_csv(path)[1]


def test_bounds_examples(capsys):
    assert run(["bounds", "--theta", "-1.631,-5.502", "--json"]) == 0
    a = json.loads(capsys.readouterr().out)
    assert a["lower"] == pytest.approx(3.27e-6, rel=0.01)
    assert a["upper"] == pytest.approx(0.1637, abs=5e-5)
    assert run(["bounds", "--theta", "0,0", "--json"]) == 0
    b = json.loads(capsys.readouterr().out)
    assert (b["lower"], b["upper"]) == (0.5, 0.5)
    assert run(["bounds", "--temp", "0.6131", "--phic", "3.373", "--json"]) == 0
    c = json.loads(capsys.readouterr().out)
    assert c["lower"] == pytest.approx(a["lower"], rel=1e-3)
    assert c["upper"] == pytest.approx(a["upper"], rel=1e-4)


def test_bounds_text(capsys):
    assert run(["bounds", "--theta=-1,-1"]) == 0
    out = capsys.readouterr().out.split()
    assert out[0] == "lower" and out[2] == "upper" and out[4] == "ratio"


def test_parameterizations_identical(tmp_path, capsys):
    assert run(["bounds", "--theta", "-0.5,-1", "--json"]) == 0
    x = json.loads(capsys.readouterr().out)
    assert run(["bounds", "--temp", "2", "--phic", "2", "--json"]) == 0
    assert json.loads(capsys.readouterr().out) == x
    assert run(["free-energy", "-N", "20", "--theta", "-0.5,-1", "--out", str(tmp_path / "a")]) == 0
    assert run(["free-energy", "-N", "20", "--temp", "2", "--phic", "2", "--out", str(tmp_path / "b")]) == 0
    for name in ("curve.csv", "strata.csv"):
        assert data_rows(tmp_path / "a" / name) == data_rows(tmp_path / "b" / name)


@pytest.mark.parametrize("usage", [
    ["bounds"],
    ["bounds", "--temp", "1"],
    ["bounds", "--theta", "-1,-1", "--temp", "1"],
    ["bounds", "--theta", "-1,-1", "--phic", "2"],
    ["bounds", "--theta", "1"],
    ["free-energy", "--theta", "-1,-1"],
    ["phase", "-N", "20"],
    ["simulate", "--phic", "3", "--ratios", "1:0:0.1"],
    ["verify", "--max-n", "7"],
    ["nonsense"],
])
def test_usage_errors_exit_2(usage, capsys):
    assert run(usage) == 2


@pytest.mark.parametrize("N", [3, 20, 100])
def test_free_energy_grid_shape(tmp_path, N):
    out = tmp_path / str(N)
    assert run(["free-energy", "-N", str(N), "--temp", "0.3,1,5", "--phic", "3.373", "--out", str(out)]) == 0
    rows = data_rows(out / "curve.csv")
    assert len(rows) == 3 * (N + 1)
    for T in ("0.3", "1.0", "5.0"):
        assert sum(r["T"] == T for r in rows) == N + 1
    strata = data_rows(out / "strata.csv")
    assert list(strata[0]) == ["T", "n_s", "m", "log_z", "F", "U", "S"]
    mirror = json.loads((out / "curve.json").read_text())
    assert mirror["columns"] == ["T", "m", "F", "S", "finite"]
    assert len(mirror["rows"]) == len(rows)


def test_free_energy_flags_and_minima(tmp_path):
    assert run(["free-energy", "-N", "3", "--temp", "1", "--phic", "1", "--out", str(tmp_path / "n3")]) == 0
    assert [r["finite"] for r in data_rows(tmp_path / "n3" / "curve.csv")] == ["1", "0", "0", "1"]
    assert [r["F"] for r in data_rows(tmp_path / "n3" / "curve.csv")][1] == "inf"
    assert run(["free-energy", "-N", "100", "--temp", "0.14,2.0", "--phic", "3.373", "--out", str(tmp_path / "x")]) == 0
    rows = data_rows(tmp_path / "x" / "curve.csv")
    for T, where in (("0.14", 1.0), ("2.0", 0.0)):
        sel = [r for r in rows if r["T"] == T and r["finite"] == "1"]
        best = min(sel, key=lambda r: float(r["F"]))
        assert abs(float(best["m"]) - where) <= 0.02


def test_phase_outputs(tmp_path):
    out = tmp_path / "ph"
    argv = ["phase", "-N", "50", "--theta", "-1.631,-5.502", "--reported", "0.95", "--out", str(out)]
    assert run(argv) == 0
    crit = json.loads((out / "critical.json").read_text())
    assert crit["T_c"] == pytest.approx(0.8717, abs=1e-3)
    assert crit["flip_interval"] == [0.84, 0.85]
    diag = crit["units_diagnostic"]
    assert diag["reference_temperature"] == pytest.approx(0.6131, abs=1e-4)
    rows = data_rows(out / "diagram.csv")
    assert list(rows[0]) == ["T", "T_over_Tc", "n_minima", "M_star", "F_star", "M_meta", "F_meta"]
    assert len(rows) == 146
    assert crit["meta"]["config_hash"] == config_hash(crit["meta"]["config"])


def test_phase_no_coexistence_exit_1(tmp_path, capsys):
    assert run(["phase", "-N", "20", "--phic", "0", "--bracket", "1,5", "--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_simulate_defaults_and_desk():
    p = build_parser()
    args = p.parse_args(["simulate", "--phic", "3.373"])
    assert (args.reps, args.burn_in, args.proposal) == (250, 500_000, "tnt")
    args = p.parse_args(["events", "--phic", "3.373"])
    assert (args.cap, args.count, args.every) == (50_000_000, 1000, 5)


def test_simulate_reproducible(tmp_path):
    base = ["simulate", "-N", "12", "--phic", "3.373", "--tc", "1.5", "--ratios", "0.3,1.2",
            "--burn-in", "5000", "--seed", "4", "--desk"]
    assert run(base + ["--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert run(base + ["--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    ma, ra = read_csv(tmp_path / "a" / "orderparam.csv")
    mb, rb = read_csv(tmp_path / "b" / "orderparam.csv")
    assert ra == rb
    assert ma["seed"] == "4" and ma["config"]["reps"] == 50
    assert ma["config_hash"] == config_hash(ma["config"])
    assert list(ra[0])[:4] == ["T", "T_over_Tc", "mean_m", "ci_lo"]


def test_simulate_logs_random_seed(tmp_path, caplog):
    argv = ["simulate", "-N", "8", "--phic", "3.373", "--tc", "1.5", "--ratios", "1.0",
            "--burn-in", "100", "--reps", "2", "--out", str(tmp_path)]
    assert run(argv) == 0
    meta, _ = read_csv(tmp_path / "orderparam.csv")
    assert meta["seed"] not in ("None", "")
    assert meta["seed"] in caplog.text


def test_events_outputs_replay(tmp_path):
    out = tmp_path / "ev"
    argv = ["events", "-N", "30", "--temp", "1.0", "--phic", "3.373", "--count", "2", "--cap", "2e6",
            "--every", "1", "--seed", "3", "--out", str(out)]
    assert run(argv) == 0
    lines = [json.loads(x) for x in (out / "trajectories.jsonl").read_text().splitlines()]
    assert lines[0]["type"] == "meta" and lines[0]["seed"] == 3
    trajs = [x for x in lines if x["type"] == "trajectory"]
    assert len(trajs) == 2
    events = [x for x in lines if x["type"] == "event" and x["attempt"] == trajs[0]["attempt"]]
    g = Graph.from_edges(30, trajs[0]["start_edges"])
    for ev in events:
        assert ev["m"] == pytest.approx(g.order_parameter)
        assert ev["event"] == ("dissolved" if g.has_edge(ev["i"], ev["j"]) else "formed")
        g.toggle(ev["i"], ev["j"])
    rows = data_rows(out / "events.csv")
    assert list(rows[0]) == ["bin_lo", "bin_hi", "class", "count", "exposure", "rate", "lo", "hi"]
    assert {r["class"] for r in rows} >= {"II", "PP", "II/IC/CC", "PI/PC"}


def test_events_capture_failure_exit_1(tmp_path, capsys):
    argv = ["events", "-N", "30", "--temp", "0.05", "--phic", "3.373", "--count", "2", "--cap", "1000",
            "--seed", "1", "--out", str(tmp_path)]
    assert run(argv) == 1
    assert "step cap" in capsys.readouterr().err


def test_verify_passes(tmp_path, capsys):
    MultiplicityTable.build(10).save(cache_path(10, tmp_path))
    assert run(["verify", "--cache", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4 and "FAIL" not in out


def test_verify_detects_corrupt_cache(tmp_path, capsys):
    p = cache_path(10, tmp_path)
    MultiplicityTable.build(10).save(p)
    with np.load(p) as f:
        data = {k: f[k] for k in f.files}
    data["log_cd"] = data["log_cd"].copy()
    data["log_cd"][6, 10] += 0.5
    np.savez(p, **data)
    assert run(["verify", "--cache", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    assert "FAIL  cache" in out


def test_cache_env_var(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ERGMPHASE_CACHE_DIR", str(tmp_path))
    MultiplicityTable.build(6).save(cache_path(6))
    assert run(["verify", "--max-n", "3"]) == 0
    assert str(tmp_path) in capsys.readouterr().out
