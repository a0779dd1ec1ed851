"""Multi-robot planners: conflict detection, constraint splitting and the constraint tree."""

from __future__ import annotations

import heapq
import itertools
import json
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

from .coverage import CoverageLedger, CoverageModel, marginal_trace, objective
from .errors import InfeasibleError, NoSolutionError, SequentialFailure, ShapeError
from .solvers import Constraint, Trajectory, consistent, get_solver, make_problem
from .world import GridVertex, Scenario, traversable

VERTEX = "vertex"
EDGE_SWAP = "edge-swap"
PLANNERS = ("unconstrained", "sequential", "cocap")
DEFAULT_MAX_EXPANSIONS = 2000


@dataclass(frozen=True)
class Conflict:
    robot_i: int
    robot_j: int
    v_i: GridVertex
    v_j: GridVertex
    t: int
    kind: str = VERTEX


def _cells(path) -> list[tuple[int, int]]:
    return [tuple(c) for c in path]


def detect_first_conflict(paths: Sequence[Sequence]) -> Conflict | None:
    """Earliest conflict scanning t ascending, vertex before swap, pairs lexicographic."""
    if len({len(p) for p in paths}) > 1:
        raise ShapeError("joint path has trajectories of different lengths")
    if not paths:
        return None
    ps = [_cells(p) for p in paths]
    n, L = len(ps), len(ps[0])
    pairs = list(itertools.combinations(range(n), 2))
    for t in range(L):
        for i, j in pairs:
            if ps[i][t] == ps[j][t]:
                return Conflict(i, j, GridVertex(*ps[i][t], t), GridVertex(*ps[j][t], t), t, VERTEX)
        if t + 1 < L:
            for i, j in pairs:
                a, b = ps[i][t], ps[j][t]
                if a != b and ps[i][t + 1] == b and ps[j][t + 1] == a:
                    return Conflict(i, j, GridVertex(*a, t), GridVertex(*b, t), t, EDGE_SWAP)
    return None


def split(c: Conflict) -> tuple[Constraint, Constraint]:
    vi, vj = (c.v_i.x, c.v_i.y), (c.v_j.x, c.v_j.y)
    if c.kind == VERTEX:
        return Constraint(c.robot_i, vi, c.t), Constraint(c.robot_j, vj, c.t)
    return Constraint(c.robot_i, vi, c.t, vj), Constraint(c.robot_j, vj, c.t, vi)


def priority_constraints(robot: int, committed: Sequence[Sequence]) -> list[Constraint]:
    """Constraints keeping ``robot`` off every committed path (vertex and swap)."""
    out = []
    for q in committed:
        q = _cells(q)
        for t in range(1, len(q)):
            out.append(Constraint(robot, q[t], t))
        for t in range(len(q) - 1):
            if q[t] != q[t + 1]:
                out.append(Constraint(robot, q[t + 1], t, q[t]))
    return out


@dataclass
class PlanResult:
    planner: str
    solver: str
    paths: list[tuple[tuple[int, int], ...]]
    marginals: list[float]
    g: float
    nodes_generated: int = 0
    nodes_expanded: int = 0
    conflicts_resolved: int = 0
    wall_ms: float = 0.0
    constraints: list[Constraint] = field(default_factory=list)
    status: str = "ok"
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "planner": self.planner,
            "solver": self.solver,
            "status": self.status,
            "message": self.message,
            "paths": [[list(c) for c in p] for p in self.paths],
            "marginals": list(self.marginals),
            "g": self.g,
            "nodes_generated": self.nodes_generated,
            "nodes_expanded": self.nodes_expanded,
            "conflicts_resolved": self.conflicts_resolved,
            "wall_ms": self.wall_ms,
            "constraints": [c.to_dict() for c in self.constraints],
        }

    def to_json(self, timing=True) -> str:
        d = self.to_dict()
        if not timing:
            d["wall_ms"] = None
        return json.dumps(d, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d) -> "PlanResult":
        return cls(
            planner=d["planner"],
            solver=d["solver"],
            paths=[tuple(tuple(c) for c in p) for p in d["paths"]],
            marginals=[float(v) for v in d["marginals"]],
            g=float(d["g"]),
            nodes_generated=int(d.get("nodes_generated", 0)),
            nodes_expanded=int(d.get("nodes_expanded", 0)),
            conflicts_resolved=int(d.get("conflicts_resolved", 0)),
            wall_ms=float(d["wall_ms"]) if d.get("wall_ms") is not None else 0.0,
            constraints=[Constraint.from_dict(c) for c in d.get("constraints", [])],
            status=d.get("status", "ok"),
            message=d.get("message", ""),
        )

    @classmethod
    def load(cls, path) -> "PlanResult":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class _Context:
    def __init__(self, scenario, solver, gamma, lambda_motion, model):
        self.scenario = scenario
        self.solver_name = solver
        self.solve_fn = get_solver(solver)
        self.gamma = gamma
        self.lambda_motion = lambda_motion
        self.model = model if model is not None else CoverageModel(scenario)

    def solve(self, robot, constraints, ledger) -> Trajectory:
        prob = make_problem(robot, constraints, ledger, self.scenario, model=self.model,
                            gamma=self.gamma, lambda_motion=self.lambda_motion)
        return self.solve_fn(prob)

    def result(self, planner, paths, t0, **kw) -> PlanResult:
        cells = [tuple(p) for p in paths]
        return PlanResult(
            planner=planner,
            solver=self.solver_name,
            paths=cells,
            marginals=marginal_trace(cells, self.model),
            g=objective(cells, self.model),
            wall_ms=(time.perf_counter() - t0) * 1e3,
            **kw,
        )


def _greedy(ctx: _Context, avoid_earlier: bool) -> tuple[list[Trajectory], CoverageLedger]:
    """Plan robots in index order; robot i sees the coverage of robots < i."""
    ledger = CoverageLedger(ctx.scenario.n_faces)
    paths: list[Trajectory] = []
    for i in range(ctx.scenario.n_robots):
        cons = priority_constraints(i, paths) if avoid_earlier else []
        try:
            traj = ctx.solve(i, cons, ledger)
        except InfeasibleError as exc:
            if avoid_earlier:
                raise SequentialFailure(i) from exc
            raise
        ledger.commit_path(i, traj.cells, ctx.model)
        paths.append(traj)
    return paths, ledger


def plan_unconstrained(scenario: Scenario, solver="view-search", *, gamma=None, lambda_motion=0.0,
                       model=None) -> PlanResult:
    t0 = time.perf_counter()
    ctx = _Context(scenario, solver, gamma, lambda_motion, model)
    paths, _ = _greedy(ctx, avoid_earlier=False)
    return ctx.result("unconstrained", paths, t0)


def plan_sequential(scenario: Scenario, solver="view-search", *, gamma=None, lambda_motion=0.0,
                    model=None) -> PlanResult:
    t0 = time.perf_counter()
    ctx = _Context(scenario, solver, gamma, lambda_motion, model)
    paths, _ = _greedy(ctx, avoid_earlier=True)
    cons = [c for i, p in enumerate(paths) for c in priority_constraints(i, paths[:i])]
    return ctx.result("sequential", paths, t0, constraints=cons)


@dataclass
class TreeNode:
    paths: list[Trajectory]
    constraints: frozenset
    ledger: CoverageLedger
    g: float

    def constraints_for(self, robot):
        return [c for c in self.constraints if c.robot == robot]


def _sorted_constraints(cs) -> list[Constraint]:
    return sorted(cs, key=lambda c: (c.robot, c.t, c.cell, c.to or (-1, -1)))


def plan_cocap(scenario: Scenario, solver="view-search", *, gamma=None, lambda_motion=0.0, model=None,
               max_expansions=DEFAULT_MAX_EXPANSIONS) -> PlanResult:
    """Constraint-tree planner seeded with the unconstrained greedy joint plan.

    Pops the node with the largest objective (ties: fewer constraints, then
    insertion order), returns it if conflict-free, otherwise splits its first
    conflict into two children, each replanning one robot against the other
    robots' coverage.
    """
    t0 = time.perf_counter()
    ctx = _Context(scenario, solver, gamma, lambda_motion, model)
    paths, ledger = _greedy(ctx, avoid_earlier=False)
    root = TreeNode(paths, frozenset(), ledger, objective([p.cells for p in paths], ctx.model))
    counter = itertools.count()
    tree = [(-root.g, 0, next(counter), root)]
    n_generated, n_expanded = 1, 0
    best = root

    while tree:
        _, _, _, node = heapq.heappop(tree)
        n_expanded += 1
        conflict = detect_first_conflict([p.cells for p in node.paths])
        if conflict is None:
            return ctx.result("cocap", node.paths, t0, nodes_generated=n_generated, nodes_expanded=n_expanded,
                              conflicts_resolved=len(node.constraints),
                              constraints=_sorted_constraints(node.constraints))
        if n_expanded >= max_expansions:
            break
        for robot, omega in zip((conflict.robot_i, conflict.robot_j), split(conflict)):
            cons = node.constraints | {omega}
            child_ledger = node.ledger.copy().remove_robot(robot)
            try:
                traj = ctx.solve(robot, [c for c in cons if c.robot == robot], child_ledger)
            except InfeasibleError:
                continue
            child_ledger.commit_path(robot, traj.cells, ctx.model)
            child_paths = list(node.paths)
            child_paths[robot] = traj
            g = objective([p.cells for p in child_paths], ctx.model)
            child = TreeNode(child_paths, cons, child_ledger, g)
            assert len(cons) == len(node.constraints) + 1
            assert all(consistent(p.cells, child.constraints_for(i)) for i, p in enumerate(child_paths))
            heapq.heappush(tree, (-g, len(cons), next(counter), child))
            n_generated += 1
            if g > best.g:
                best = child

    reason = "node budget exhausted" if tree else "constraint tree exhausted"
    raise NoSolutionError(f"cocap: {reason} without a conflict-free plan", best_node=best,
                          nodes_generated=n_generated, nodes_expanded=n_expanded)


PLANNER_FUNCS = {
    "unconstrained": plan_unconstrained,
    "sequential": plan_sequential,
    "cocap": plan_cocap,
}


def run_planner(name: str, scenario: Scenario, solver: str, **kw) -> PlanResult:
    try:
        fn = PLANNER_FUNCS[name]
    except KeyError:
        raise ValueError(f"unknown planner {name!r}; choose from {list(PLANNER_FUNCS)}") from None
    return fn(scenario, solver, **kw)


def validate(result: PlanResult, scenario: Scenario, tol=1e-9) -> dict:
    """Re-check a plan; returns ``{"ok": bool, "checks": {name: {"passed", "detail"}}}``."""
    checks = {}

    def record(name, passed, detail=""):
        checks[name] = {"passed": bool(passed), "detail": detail}

    paths = [_cells(p) for p in result.paths]
    T = scenario.horizon
    shape_ok = len(paths) == scenario.n_robots and all(len(p) == T + 1 for p in paths)
    record("shape", shape_ok, "" if shape_ok else f"expected {scenario.n_robots} paths of length {T + 1}")
    if not shape_ok:
        return {"ok": False, "checks": checks}

    bad_start = [i for i, p in enumerate(paths) if p[0] != scenario.robots[i]]
    record("starts", not bad_start, f"robots {bad_start} do not start at their start cell" if bad_start else "")

    hm, motion = scenario.heightmap, scenario.motion
    bad_cells = [(i, t, c) for i, p in enumerate(paths) for t, c in enumerate(p)
                 if not (hm.in_bounds(*c) and traversable(c, hm, motion))]
    record("traversability", not bad_cells, f"first bad cell {bad_cells[0]}" if bad_cells else "")

    jumps = [(i, t) for i, p in enumerate(paths) for t in range(T) if not motion.allows(p[t], p[t + 1])]
    record("continuity", not jumps, f"first illegal step (robot, t) = {jumps[0]}" if jumps else "")

    broken = [c for c in result.constraints if c.violated_by(paths[c.robot])] if result.constraints else []
    record("constraints", not broken, f"violated {broken[0]}" if broken else "")

    if result.planner in ("sequential", "cocap"):
        conflict = detect_first_conflict(paths)
        record("conflict_free", conflict is None, "" if conflict is None else f"conflict {conflict}")
    else:
        record("conflict_free", True, "not required for the unconstrained planner")

    g = objective(paths, CoverageModel(scenario))
    diff = abs(g - result.g)
    record("objective", diff <= tol * max(1.0, abs(g)), f"stored {result.g!r}, recomputed {g!r}")
    msum = math.fsum(result.marginals)
    record("marginals", len(result.marginals) == T + 1 and abs(msum - g) <= 1e-6 * max(1.0, g),
           f"marginal sum {msum!r} vs objective {g!r}")
    return {"ok": all(c["passed"] for c in checks.values()), "checks": checks}
