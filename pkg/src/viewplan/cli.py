"""Command line entry point: generate, plan, bench and validate."""

from __future__ import annotations

import argparse
import json
import sys

from .coordination import PLANNERS, PlanResult, run_planner, validate
from .errors import ViewPlanError
from .experiment import ExperimentConfig, all_ok, load_scenario, run_experiment
from .scenarios import GENERATORS
from .solvers import SOLVERS


def _param(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _common(p, scenario_required=True):
    p.add_argument("--scenario", required=scenario_required,
                   help=f"generator name ({', '.join(GENERATORS)}) or scenario JSON path")
    p.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE",
                   help="generator parameter, e.g. --param corridor_width=2 (repeatable)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="viewplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a generated scenario to a JSON file")
    _common(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("plan", help="run one planner with one solver")
    _common(p)
    p.add_argument("--planner", choices=PLANNERS, default="cocap")
    p.add_argument("--solver", choices=list(SOLVERS), default="view-search")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--lambda-motion", type=float, default=0.0)
    p.add_argument("--out", help="PlanResult JSON path (default: stdout)")

    p = sub.add_parser("bench", help="run the planner x solver matrix and write CSV metrics")
    _common(p)
    p.add_argument("--planner", choices=PLANNERS, action="append", help="repeatable; default all")
    p.add_argument("--solver", choices=list(SOLVERS), action="append", help="repeatable; default view-search")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--lambda-motion", type=float, default=0.0)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--timing-strict", action="store_true", help="time every cell in isolation")
    p.add_argument("--no-timing", action="store_true", help="leave compute_ms blank for byte-stable output")

    p = sub.add_parser("validate", help="re-check a PlanResult against its scenario")
    _common(p)
    p.add_argument("plan", help="PlanResult JSON path")
    return parser


def _cmd_generate(args):
    if args.scenario not in GENERATORS:
        raise SystemExit(f"unknown generator {args.scenario!r}")
    sc = load_scenario(args.scenario, args.seed, dict(args.param))
    sc.save(args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_plan(args):
    sc = load_scenario(args.scenario, args.seed, dict(args.param))
    try:
        res = run_planner(args.planner, sc, args.solver, gamma=args.gamma, lambda_motion=args.lambda_motion)
    except ViewPlanError as exc:
        print(f"{args.planner} failed: {exc}", file=sys.stderr)
        return 2
    text = res.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"{res.planner}/{res.solver}: g={res.g:.6f} expanded={res.nodes_expanded} "
              f"{res.wall_ms:.1f} ms -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_bench(args):
    cfg = ExperimentConfig(
        scenario=args.scenario, params=dict(args.param),
        planners=tuple(args.planner or PLANNERS), solvers=tuple(args.solver or ("view-search",)),
        out_dir=args.out, repetitions=args.repetitions, seed=args.seed, gamma=args.gamma,
        lambda_motion=args.lambda_motion, timing=not args.no_timing, timing_strict=args.timing_strict,
    )
    records = run_experiment(cfg)
    for r in records:
        g = "-" if r.total_reward is None else f"{r.total_reward:.3f}"
        ms = "-" if r.compute_ms is None else f"{r.compute_ms:.1f}"
        print(f"rep {r.repetition} {r.planner:13s} {r.solver:15s} g={g:>10s} ms={ms:>9s} {r.status}")
    return 0 if all_ok(records) else 2


def _cmd_validate(args):
    sc = load_scenario(args.scenario, args.seed, dict(args.param))
    report = validate(PlanResult.load(args.plan), sc)
    print(json.dumps(report, indent=1))
    return 0 if report["ok"] else 1


COMMANDS = {"generate": _cmd_generate, "plan": _cmd_plan, "bench": _cmd_bench, "validate": _cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
