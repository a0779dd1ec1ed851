import csv
import json
import math
import subprocess
import sys

import pytest

from conftest import make_scenario
from viewplan import PlanResult, Scenario, validate
from viewplan.cli import main
from viewplan.experiment import METRICS_HEADER, ExperimentConfig, run_experiment

SMALL = {"width": 24, "height": 11}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(planners=())
    with pytest.raises(ValueError):
        ExperimentConfig(repetitions=0)
    with pytest.raises(ValueError):
        ExperimentConfig(planners=("magic",))
    with pytest.raises(ValueError):
        ExperimentConfig(solvers=("magic",))


def test_corridor_end_to_end(tmp_path):
    cfg = ExperimentConfig("corridor", SMALL, out_dir=str(tmp_path))
    records = run_experiment(cfg)
    assert len(records) == 3 and all(r.ok for r in records)
    rows = read_csv(tmp_path / "metrics.csv")
    assert tuple(rows[0][:7]) == METRICS_HEADER
    assert len(rows) == 4
    trace = read_csv(tmp_path / "trace.csv")
    assert trace[0] == ["t", "unconstrained", "sequential", "cocap"]
    assert len(trace) - 1 == 9  # t = 0..8
    scale = json.loads((tmp_path / "summary.json").read_text())["trace_scale"]["0"]
    by_name = {r.planner: r for r in records}
    assert scale == by_name["unconstrained"].total_reward
    for k, name in enumerate(trace[0][1:], start=1):
        col = [float(row[k]) for row in trace[1:]]
        assert all(0.0 <= v <= 1.0 for v in col)
        assert abs(math.fsum(col) * scale - by_name[name].total_reward) <= 1e-6
    sc = Scenario.load(tmp_path / "scenario.json")
    for f in (tmp_path / "plans").iterdir():
        assert validate(PlanResult.load(f), sc)["ok"]


def test_repetitions_and_summary(tmp_path):
    cfg = ExperimentConfig("corridor", SMALL, out_dir=str(tmp_path), repetitions=5, seed=3, timing=False)
    records = run_experiment(cfg)
    assert len(records) == 15
    assert sorted({r.seed for r in records}) == [3, 4, 5, 6, 7]
    summary = json.loads((tmp_path / "summary.json").read_text())["cells"]
    cell = summary["cocap:view-search"]
    vals = [r.total_reward for r in records if r.planner == "cocap"]
    assert cell["runs"] == 5
    assert cell["total_reward"]["min"] == min(vals) and cell["total_reward"]["max"] == max(vals)
    assert cell["total_reward"]["mean"] == pytest.approx(sum(vals) / 5)
    assert (tmp_path / "trace_rep4.csv").exists()


def test_bench_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        run_experiment(ExperimentConfig("corridor", SMALL, out_dir=str(tmp_path / name), timing=False))
    for f in ("metrics.csv", "trace.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_failure_becomes_a_row(tmp_path):
    sc = make_scenario(width=3, height=1, horizon=2, robots=((0, 0), (1, 0), (2, 0)), actors=[((0.5, 0.5, 0.0),)])
    path = tmp_path / "crowded.json"
    sc.save(path)
    records = run_experiment(ExperimentConfig(str(path), out_dir=str(tmp_path / "out"), timing_strict=True))
    status = {r.planner: r.status for r in records}
    assert status["sequential"] == "failed: SequentialFailure"
    assert status["unconstrained"] == "ok" and status["cocap"] == "ok"
    rows = read_csv(tmp_path / "out" / "metrics.csv")
    failed = [r for r in rows if r[0] == "sequential"][0]
    assert failed[2] == "" and failed[7].startswith("failed")
    trace = read_csv(tmp_path / "out" / "trace.csv")
    assert all(row[2] == "" for row in trace[1:])


def test_cli_generate_plan_validate(tmp_path, capsys):
    scen = tmp_path / "c.json"
    assert main(["generate", "--scenario", "corridor", "--seed", "2", "--param", "width=24",
                 "--param", "height=11", "--out", str(scen)]) == 0
    plan = tmp_path / "plan.json"
    assert main(["plan", "--scenario", str(scen), "--planner", "cocap", "--solver", "view-search",
                 "--gamma", "0.9", "--out", str(plan)]) == 0
    assert main(["validate", "--scenario", str(scen), str(plan)]) == 0
    out = capsys.readouterr().out
    report = json.loads(out[out.index("{"):])
    assert report["ok"]
    d = json.loads(plan.read_text())
    d["g"] += 1
    plan.write_text(json.dumps(d))
    assert main(["validate", "--scenario", str(scen), str(plan)]) == 1


def test_cli_bench_exit_codes(tmp_path):
    ok = main(["bench", "--scenario", "corridor", "--param", "width=24", "--param", "height=11",
               "--planner", "cocap", "--solver", "view-search", "--solver", "value-iteration",
               "--out", str(tmp_path / "ok"), "--timing-strict"])
    assert ok == 0
    trace = read_csv(tmp_path / "ok" / "trace.csv")
    assert trace[0] == ["t", "cocap:view-search", "cocap:value-iteration"]
    sc = make_scenario(width=3, height=1, horizon=2, robots=((0, 0), (1, 0), (2, 0)), actors=[((0.5, 0.5, 0.0),)])
    sc.save(tmp_path / "crowded.json")
    bad = main(["bench", "--scenario", str(tmp_path / "crowded.json"), "--out", str(tmp_path / "bad")])
    assert bad == 2


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "viewplan", "generate", "--scenario", "bottleneck",
                          "--out", str(tmp_path / "b.json")], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert Scenario.load(tmp_path / "b.json").n_robots == 4
