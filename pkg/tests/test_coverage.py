import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_scenario
from viewplan import CoverageLedger, CoverageModel, cov, covm, covp, objective
from viewplan.coverage import build_ledger, commit, marginal_gain, marginal_trace, remove_robot
from viewplan.errors import DoubleCommitError, ShapeError
from viewplan.scenarios import generate_clutter, generate_corridor

densities = st.floats(0.0, 1e5, allow_nan=False)


@pytest.mark.parametrize("c,p,expected", [(4.0, 0.0, 2.0), (5.0, 4.0, 1.0), (0.0, 0.0, 0.0), (0.0, 9.0, 0.0)])
def test_marginal_gain_hand_cases(c, p, expected):
    assert abs(marginal_gain([c], [p]) - expected) <= 1e-12


@given(st.lists(st.tuples(densities, densities, densities), min_size=1, max_size=8))
def test_marginal_gain_is_antitone_in_context(rows):
    c = np.array([r[0] for r in rows])
    p1 = np.array([r[1] for r in rows])
    p2 = p1 + np.array([r[2] for r in rows])
    assert marginal_gain(c, p1) >= marginal_gain(c, p2)
    assert marginal_gain(c, p1) >= 0.0


def test_ledger_commit_and_remove():
    L = CoverageLedger(8)
    L.add(0, 1, 2, 3, 4.0)
    L.add(1, 1, 2, 3, 5.0)
    L.add(1, 0, 0, 0, 1.0)
    assert L.covp(1, 2) == 9.0
    assert covp(L, 0, 0) == 1.0
    assert L.robots() == {0, 1}
    assert L.value() == pytest.approx(3.0 + 1.0)
    with pytest.raises(DoubleCommitError):
        L.add(0, 1, 2, 3, 1.0)
    with pytest.raises(ValueError):
        L.add(2, 0, 0, 0, -1.0)
    remove_robot(L, 1)
    assert L.covp(1, 2) == 4.0 and L.covp(0, 0) == 0.0
    assert L.robots() == {0}
    assert L.check()
    assert L.entries() == {(0, 1, 2, 3): 4.0}


def test_ledger_totals_are_read_only():
    L = CoverageLedger(4)
    with pytest.raises(ValueError):
        L.totals[0] = 1.0


@given(st.lists(densities, min_size=1, max_size=30), st.randoms())
def test_ledger_totals_independent_of_commit_order(values, rnd):
    keys = [(i % 3, i // 3) for i in range(len(values))]
    a, b = CoverageLedger(1), CoverageLedger(1)
    for (r, t), v in zip(keys, values):
        a.add(r, 0, 0, t, v)
    order = list(range(len(values)))
    rnd.shuffle(order)
    for k in order:
        b.add(keys[k][0], 0, 0, keys[k][1], values[k])
    assert a.covp(0, 0) == b.covp(0, 0) == math.fsum(values)
    assert a.check() and b.check()


def test_commit_then_remove_restores(rng):
    sc = generate_clutter(seed=3, n_actors=2, n_robots=2)
    model = CoverageModel(sc)
    L = CoverageLedger(sc.n_faces)
    commit(L, 0, (1, 1, 0), model)
    before = L.totals.copy()
    for t in range(sc.horizon + 1):
        x, y = sc.robots[1]
        commit(L, 1, (x, y, t), model)
    remove_robot(L, 1)
    np.testing.assert_array_equal(L.totals, before)


def test_cov_matches_model():
    sc = generate_corridor()
    model = CoverageModel(sc)
    for v in [(14, 8, 3), (25, 12, 5), (12, 10, 0)]:
        for j in range(sc.n_actors):
            for f in range(4):
                assert cov(v, j, f, sc) == model.cov(v, j, f)
    d = model.densities(14, 8, 3)
    with pytest.raises(ValueError):
        d[0] = 1.0
    n = model.evaluations
    model.densities(14, 8, 3)
    assert model.evaluations == n


def _random_paths(sc, rng):
    paths = []
    for i in range(sc.n_robots):
        x, y = sc.robots[i]
        p = [(x, y)]
        for _ in range(sc.horizon):
            x = int(np.clip(x + rng.integers(-1, 2), 0, sc.heightmap.width - 1))
            y = int(np.clip(y + rng.integers(-1, 2), 0, sc.heightmap.height - 1))
            p.append((x, y))
        paths.append(p)
    return paths


@pytest.mark.parametrize("seed", range(6))
def test_telescoping_and_monotonicity(seed):
    rng = np.random.default_rng(seed)
    sc = generate_clutter(seed=seed, n_actors=2, n_robots=3, obstacle_density=0.0)
    model = CoverageModel(sc)
    paths = _random_paths(sc, rng)
    g = objective(paths, model)
    assert abs(math.fsum(marginal_trace(paths, model)) - g) <= 1e-9
    assert all(m >= 0 for m in marginal_trace(paths, model))
    # dropping a robot never increases the objective
    for i in range(sc.n_robots):
        L = build_ledger(paths, model).remove_robot(i)
        assert L.value() <= g + 1e-12
        np.testing.assert_allclose(L.value(), _value_without(paths, i, model), rtol=0, atol=1e-9)
    assert objective(paths, model) == g  # deterministic


def _value_without(paths, i, model):
    L = CoverageLedger(model.n_faces)
    for r, p in enumerate(paths):
        if r != i:
            L.commit_path(r, p, model)
    return L.value()


def test_objective_shape_errors():
    sc = generate_clutter(seed=0, n_robots=2)
    model = CoverageModel(sc)
    with pytest.raises(ShapeError):
        objective([[(0, 0)] * (sc.horizon + 1), [(1, 1)] * sc.horizon], model)
    with pytest.raises(ShapeError):
        objective([[(0, 0)] * 2, [(1, 1)] * 2], model)


def test_covm_against_frozen_ledger():
    sc = make_scenario(width=8, height=8, robots=((0, 0), (7, 7)))
    model = CoverageModel(sc)
    L = CoverageLedger(sc.n_faces)
    x = (0, 0, 1)
    first = covm(x, L, model)
    assert first == pytest.approx(float(np.sum(np.sqrt(model.densities(0, 0, 1)))), rel=1e-12)
    L.commit(1, x, model)
    assert covm(x, L, model) <= first
