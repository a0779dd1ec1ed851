import itertools
import json

import pytest
from hypothesis import given, strategies as st

from conftest import make_scenario
from viewplan import PlanResult, detect_first_conflict, plan_cocap, plan_sequential, plan_unconstrained, split, \
    validate
from viewplan.coordination import EDGE_SWAP, VERTEX, Conflict, priority_constraints, run_planner
from viewplan.coverage import CoverageLedger, CoverageModel
from viewplan.errors import NoSolutionError, SequentialFailure, ShapeError
from viewplan.scenarios import generate_corridor
from viewplan.solvers import consistent, view_search
from viewplan.world import GridVertex


def brute_force_first(paths):
    """Quadratic scan in the documented order: t, then vertex before swap, then pairs."""
    n, L = len(paths), len(paths[0])
    found = []
    for t in range(L):
        for i, j in itertools.combinations(range(n), 2):
            if paths[i][t] == paths[j][t]:
                found.append((t, 0, i, j))
            if t + 1 < L and paths[i][t] != paths[j][t] and paths[i][t] == paths[j][t + 1] \
                    and paths[j][t] == paths[i][t + 1]:
                found.append((t, 1, i, j))
    return min(found) if found else None


joint_paths = st.integers(2, 4).flatmap(lambda n: st.integers(1, 6).flatmap(
    lambda L: st.lists(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=L, max_size=L),
                       min_size=n, max_size=n)))


@given(joint_paths)
def test_first_conflict_matches_brute_force(paths):
    got = detect_first_conflict(paths)
    want = brute_force_first(paths)
    if want is None:
        assert got is None
        return
    t, kind, i, j = want
    assert (got.t, got.kind, got.robot_i, got.robot_j) == (t, [VERTEX, EDGE_SWAP][kind], i, j)
    assert (got.v_i.x, got.v_i.y) == paths[i][t]
    assert (got.v_j.x, got.v_j.y) == paths[j][t]


def test_conflict_examples():
    assert detect_first_conflict([[(0, 0), (0, 1)], [(1, 0), (1, 1)]]) is None
    a = [(0, 0), (1, 1), (2, 2), (2, 2)]
    b = [(3, 3), (3, 2), (3, 2), (2, 2)]
    c = detect_first_conflict([a, b])
    assert c == Conflict(0, 1, GridVertex(2, 2, 3), GridVertex(2, 2, 3), 3, VERTEX)
    swap = detect_first_conflict([[(0, 0), (1, 0)], [(1, 0), (0, 0)]])
    assert swap.kind == EDGE_SWAP and swap.t == 0
    with pytest.raises(ShapeError):
        detect_first_conflict([[(0, 0)], [(1, 1), (1, 2)]])


def test_split():
    ci, cj = split(Conflict(0, 1, GridVertex(2, 2, 3), GridVertex(2, 2, 3), 3, VERTEX))
    assert (ci.robot, ci.cell, ci.t, ci.to) == (0, (2, 2), 3, None)
    assert (cj.robot, cj.cell, cj.t, cj.to) == (1, (2, 2), 3, None)
    ci, cj = split(Conflict(0, 1, GridVertex(0, 0, 0), GridVertex(1, 0, 0), 0, EDGE_SWAP))
    assert (ci.cell, ci.to) == ((0, 0), (1, 0))
    assert (cj.cell, cj.to) == ((1, 0), (0, 0))


def test_priority_constraints_block_vertex_and_swap():
    q = [(0, 0), (1, 0), (1, 0)]
    cons = priority_constraints(1, [q])
    assert not consistent([(5, 5), (1, 0), (2, 0)], cons)
    assert not consistent([(1, 0), (0, 0), (0, 0)], cons)  # swap with q at t=0
    assert consistent([(0, 0), (0, 1), (0, 2)], cons)  # sharing only the start is allowed


def _crowded():
    return make_scenario(width=3, height=1, horizon=2, robots=((0, 0), (1, 0), (2, 0)),
                         actors=[((0.5, 0.5, 0.0),)])


def test_split_then_replan_removes_conflict():
    sc = _crowded()
    model = CoverageModel(sc)
    res = plan_unconstrained(sc, model=model)
    c = detect_first_conflict(res.paths)
    assert c is not None
    for robot, omega in zip((c.robot_i, c.robot_j), split(c)):
        L = CoverageLedger(sc.n_faces)
        for i, p in enumerate(res.paths):
            if i != robot:
                L.commit_path(i, p, model)
        traj = view_search(robot, [omega], L, sc, model=model)
        paths = list(res.paths)
        paths[robot] = traj.cells
        again = detect_first_conflict(paths)
        assert consistent(traj.cells, [omega])
        assert again is None or (again.robot_i, again.robot_j, again.t, again.kind) != \
            (c.robot_i, c.robot_j, c.t, c.kind) or (again.v_i, again.v_j) != (c.v_i, c.v_j)


def test_single_robot_unconstrained_is_bare_solve():
    sc = make_scenario(width=7, height=7)
    res = plan_unconstrained(sc)
    assert list(res.paths[0]) == list(view_search(0, [], None, sc).cells)
    assert res.nodes_expanded == 0


def test_sequential_failure_where_cocap_succeeds():
    sc = _crowded()
    with pytest.raises(SequentialFailure) as exc:
        plan_sequential(sc)
    assert exc.value.robot == 1
    res = plan_cocap(sc)
    assert detect_first_conflict(res.paths) is None
    assert validate(res, sc)["ok"]


def test_cocap_budget_exhaustion_reports_best_node():
    sc = _crowded()
    with pytest.raises(NoSolutionError) as exc:
        plan_cocap(sc, max_expansions=2)
    err = exc.value
    assert err.nodes_expanded == 2
    assert err.best_node is not None and err.nodes_generated >= 1


@pytest.mark.parametrize("solver", ["view-search", "value-iteration"])
def test_corridor_planners(solver):
    sc = generate_corridor(width=24, height=11)
    res = {p: run_planner(p, sc, solver) for p in ("unconstrained", "sequential", "cocap")}
    for name, r in res.items():
        report = validate(r, sc)
        assert report["ok"], report
    assert detect_first_conflict(res["cocap"].paths) is None
    assert res["cocap"].conflicts_resolved == len(res["cocap"].constraints)
    assert res["sequential"].g - 1e-6 <= res["cocap"].g


def test_conflict_free_root_returned_unchanged():
    sc = make_scenario(width=9, height=9, robots=((0, 0), (8, 8)), horizon=2)
    unc = plan_unconstrained(sc)
    assert detect_first_conflict(unc.paths) is None
    res = plan_cocap(sc)
    assert res.nodes_expanded == 1 and res.nodes_generated == 1
    assert res.paths == unc.paths and res.g == unc.g


def test_validate_flags_bad_plans():
    sc = generate_corridor(width=24, height=11)
    good = plan_cocap(sc)
    assert validate(good, sc)["ok"]

    tampered = PlanResult.from_dict(good.to_dict())
    tampered.g += 1.0
    rep = validate(tampered, sc)
    assert not rep["ok"] and not rep["checks"]["objective"]["passed"]

    colliding = PlanResult.from_dict(good.to_dict())
    p0 = colliding.paths[0]
    colliding.paths[1] = (good.paths[1][0],) + tuple(p0[1:])
    rep = validate(colliding, sc)
    assert not rep["checks"]["conflict_free"]["passed"]
    assert "conflict" in rep["checks"]["conflict_free"]["detail"]

    jumpy = PlanResult.from_dict(good.to_dict())
    p = list(jumpy.paths[0])
    p[2] = (p[2][0] + 5, p[2][1])
    jumpy.paths[0] = tuple(p)
    assert not validate(jumpy, sc)["checks"]["continuity"]["passed"]

    moved = PlanResult.from_dict(good.to_dict())
    moved.paths[0] = ((0, 0),) + tuple(moved.paths[0][1:])
    assert not validate(moved, sc)["checks"]["starts"]["passed"]

    short = PlanResult.from_dict(good.to_dict())
    short.paths = short.paths[:1]
    assert not validate(short, sc)["ok"]


def test_plan_result_json_round_trip(tmp_path):
    sc = generate_corridor(width=24, height=11)
    res = plan_cocap(sc)
    path = tmp_path / "plan.json"
    path.write_text(res.to_json())
    back = PlanResult.load(path)
    assert back == res
    assert json.loads(res.to_json(timing=False))["wall_ms"] is None
