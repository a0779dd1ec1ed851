"""Experiment driver: run planner/solver matrices and write metrics, traces and plans."""

from __future__ import annotations

import csv
import gc
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .coordination import PLANNERS, PlanResult, run_planner, validate
from .coverage import CoverageModel
from .errors import ViewPlanError
from .scenarios import GENERATORS
from .solvers import SOLVERS
from .world import Scenario

METRICS_HEADER = ("planner", "solver", "total_reward", "compute_ms", "nodes_generated", "nodes_expanded",
                  "conflicts_resolved")
EXTRA_COLUMNS = ("status", "repetition", "seed")


@dataclass
class ExperimentConfig:
    scenario: str = "corridor"  # generator name or path to a scenario JSON file
    params: dict = field(default_factory=dict)
    planners: tuple = PLANNERS
    solvers: tuple = ("view-search",)
    out_dir: str | None = None
    repetitions: int = 1
    seed: int = 0
    gamma: float | None = None
    lambda_motion: float = 0.0
    timing: bool = True
    timing_strict: bool = False

    def __post_init__(self):
        self.planners = tuple(self.planners)
        self.solvers = tuple(self.solvers)
        if not self.planners:
            raise ValueError("at least one planner is required")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        bad = [p for p in self.planners if p not in PLANNERS]
        if bad:
            raise ValueError(f"unknown planners {bad}; choose from {list(PLANNERS)}")
        bad = [s for s in self.solvers if s not in SOLVERS]
        if bad:
            raise ValueError(f"unknown solvers {bad}; choose from {list(SOLVERS)}")


@dataclass
class MetricsRecord:
    planner: str
    solver: str
    total_reward: float | None
    scaled_rewards: list[float]
    compute_ms: float | None
    nodes_generated: int = 0
    nodes_expanded: int = 0
    conflicts_resolved: int = 0
    status: str = "ok"
    repetition: int = 0
    seed: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def row(self) -> list[str]:
        def num(v):
            return "" if v is None else repr(float(v))
        return [self.planner, self.solver, num(self.total_reward), num(self.compute_ms),
                str(self.nodes_generated), str(self.nodes_expanded), str(self.conflicts_resolved),
                self.status, str(self.repetition), str(self.seed)]


def load_scenario(source: str, seed: int = 0, params: dict | None = None) -> Scenario:
    """A generator name (``corridor``, ``bottleneck``, ``clutter``) or a scenario file path."""
    if source in GENERATORS:
        return GENERATORS[source](seed=seed, **(params or {}))
    if params:
        raise ValueError("generator parameters only apply to generator names")
    return Scenario.load(source)


def _column(planner, solver, solvers):
    return planner if len(solvers) == 1 else f"{planner}:{solver}"


def _run_cell(cfg, scenario, planner, solver, model):
    if cfg.timing_strict:
        model = None
        gc.collect()
        gc.disable()
    try:
        res = run_planner(planner, scenario, solver, gamma=cfg.gamma, lambda_motion=cfg.lambda_motion, model=model)
    finally:
        if cfg.timing_strict:
            gc.enable()
    return res


def run_repetition(cfg: ExperimentConfig, rep: int):
    seed = cfg.seed + rep
    scenario = load_scenario(cfg.scenario, seed, cfg.params)
    # one shared density cache per scenario unless each cell must be timed in isolation
    model = CoverageModel(scenario)
    results: dict[tuple[str, str], PlanResult | None] = {}
    records = []
    for solver in cfg.solvers:
        for planner in cfg.planners:
            try:
                res = _run_cell(cfg, scenario, planner, solver, model)
            except ViewPlanError as exc:
                results[(planner, solver)] = None
                records.append(MetricsRecord(planner, solver, None, [], None,
                                             status=f"failed: {type(exc).__name__}", repetition=rep, seed=seed))
                continue
            report = validate(res, scenario, tol=1e-9)
            status = "ok" if report["ok"] else "invalid: " + ",".join(
                k for k, v in report["checks"].items() if not v["passed"])
            results[(planner, solver)] = res
            records.append(MetricsRecord(planner, solver, res.g, [], res.wall_ms if cfg.timing else None,
                                         res.nodes_generated, res.nodes_expanded, res.conflicts_resolved,
                                         status, rep, seed))

    scale = _trace_scale(results)
    for rec in records:
        res = results.get((rec.planner, rec.solver))
        if res is not None:
            rec.scaled_rewards = [m / scale for m in res.marginals]
    return scenario, results, records, scale


def _trace_scale(results) -> float:
    """Traces are divided by the unconstrained g when available, else by the largest g."""
    unc = [r.g for (p, _), r in results.items() if r is not None and p == "unconstrained"]
    pool = unc or [r.g for r in results.values() if r is not None]
    scale = max(pool, default=1.0)
    return scale if scale > 0 else 1.0


def metrics_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER + EXTRA_COLUMNS)
    for rec in records:
        w.writerow(rec.row())
    return buf.getvalue()


def trace_csv(records, horizon: int, solvers) -> str:
    cols = [(r, _column(r.planner, r.solver, solvers)) for r in records]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [name for _, name in cols])
    for t in range(horizon + 1):
        w.writerow([t] + [repr(r.scaled_rewards[t]) if r.scaled_rewards else "" for r, _ in cols])
    return buf.getvalue()


def summarize(records) -> dict:
    """mean/min/max of total_reward and compute_ms per (planner, solver) over successful repetitions."""
    groups: dict[str, list[MetricsRecord]] = {}
    for r in records:
        groups.setdefault(f"{r.planner}:{r.solver}", []).append(r)
    out = {}
    for key, rs in groups.items():
        ok = [r for r in rs if r.ok]
        entry = {"runs": len(rs), "failures": len(rs) - len(ok)}
        for name in ("total_reward", "compute_ms", "nodes_expanded"):
            vals = [getattr(r, name) for r in ok if getattr(r, name) is not None]
            if vals:
                entry[name] = {"mean": math.fsum(vals) / len(vals), "min": min(vals), "max": max(vals)}
        out[key] = entry
    return out


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def run_experiment(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """Run every (planner, solver, repetition) cell; failures become rows, never exceptions.

    With ``out_dir`` set, writes ``metrics.csv``, ``summary.json``, and per repetition
    ``trace.csv`` (``trace_rep<k>.csv`` when repeating), the scenario and each plan's JSON.
    """
    out = Path(cfg.out_dir) if cfg.out_dir else None
    records: list[MetricsRecord] = []
    scales = {}
    for rep in range(cfg.repetitions):
        scenario, results, recs, scale = run_repetition(cfg, rep)
        records.extend(recs)
        scales[rep] = scale
        if out is None:
            continue
        tag = "" if cfg.repetitions == 1 else f"_rep{rep}"
        _write(out / f"scenario{tag}.json", scenario.to_json())
        _write(out / f"trace{tag}.csv", trace_csv(recs, scenario.horizon, cfg.solvers))
        for (planner, solver), res in results.items():
            if res is not None:
                _write(out / "plans" / f"{planner}_{solver}{tag}.json", res.to_json(timing=cfg.timing))
    if out is not None:
        _write(out / "metrics.csv", metrics_csv(records))
        summary = {"trace_scale": {str(k): v for k, v in scales.items()}, "cells": summarize(records)}
        if not cfg.timing:
            for cell in summary["cells"].values():
                cell.pop("compute_ms", None)
        _write(out / "summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return records


def all_ok(records) -> bool:
    return all(r.ok for r in records)

