"""Single-robot trajectory optimizers over the (x, y, t) lattice.

Both solvers maximize the same discounted surrogate

    sum_{t=1..T} gamma^t * r(x_{t-1} -> x_t)

where ``r`` is the coverage gain against a frozen ledger (the robot's own
earlier views are deliberately not fed back, so the reward is Markovian in
(x, y, t)). Value iteration sweeps every traversable state; view search is a
best-first search on cumulative reward, made exact by an optimistic bound
on the reward still to come.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Protocol, Sequence

import numpy as np

from .coverage import CoverageLedger, CoverageModel, as_model, marginal_gain
from .errors import HorizonError, InfeasibleError
from .world import GridVertex, HeightMap, MotionModel, Scenario, traversable_mask

DEFAULT_GAMMA = 0.95
# slack added to the reward bound so float rounding never makes it pessimistic
_BOUND_REL = 1e-9
_BOUND_ABS = 1e-12


@dataclass(frozen=True)
class Constraint:
    """Vertex form forbids ``cell`` at ``t``; edge form forbids ``cell@t -> to@t+1``."""

    robot: int
    cell: tuple[int, int]
    t: int
    to: tuple[int, int] | None = None

    @property
    def is_vertex(self) -> bool:
        return self.to is None

    def violated_by(self, path: Sequence) -> bool:
        if self.is_vertex:
            return 0 <= self.t < len(path) and tuple(path[self.t]) == self.cell
        if not 0 <= self.t < len(path) - 1:
            return False
        return tuple(path[self.t]) == self.cell and tuple(path[self.t + 1]) == self.to

    def to_dict(self) -> dict:
        d = {"robot": self.robot, "cell": list(self.cell), "t": self.t}
        if self.to is not None:
            d["to"] = list(self.to)
        return d

    @classmethod
    def from_dict(cls, d) -> "Constraint":
        to = d.get("to")
        return cls(int(d["robot"]), tuple(d["cell"]), int(d["t"]), tuple(to) if to is not None else None)


def consistent(path: Sequence, constraints: Iterable[Constraint]) -> bool:
    return not any(c.violated_by(path) for c in constraints)


@dataclass(frozen=True)
class Trajectory:
    robot: int
    cells: tuple[tuple[int, int], ...]
    value: float = 0.0  # discounted surrogate objective under the solver's reward
    expanded: int = 0

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    def __getitem__(self, t):
        return self.cells[t]

    def vertex(self, t) -> GridVertex:
        x, y = self.cells[t]
        return GridVertex(x, y, t)


class SearchNode(NamedTuple):
    cum_reward: float
    vertex: GridVertex
    action: tuple[int, int]  # incoming displacement
    parent: GridVertex | None


class Reward(Protocol):
    def __call__(self, prev: tuple[int, int], cur: tuple[int, int], t: int) -> float: ...

    def bound_layer(self, t: int) -> np.ndarray: ...


class CoverageReward:
    """Coverage gain of entering a cell at time t against a frozen ledger, minus a motion penalty."""

    def __init__(self, model: CoverageModel, ledger: CoverageLedger, lambda_motion: float = 0.0):
        self.model = model
        self.totals = np.array(ledger.totals)
        self.lambda_motion = lambda_motion
        self._gain: dict[tuple[int, int, int], float] = {}

    def gain(self, x, y, t) -> float:
        key = (x, y, t)
        g = self._gain.get(key)
        if g is None:
            g = marginal_gain(self.model.densities(x, y, t), self.totals)
            self._gain[key] = g
        return g

    def __call__(self, prev, cur, t):
        r = self.gain(cur[0], cur[1], t)
        if self.lambda_motion:
            r = max(0.0, r - self.lambda_motion * math.hypot(cur[0] - prev[0], cur[1] - prev[1]))
        return r

    def bound_layer(self, t):
        ub = self.model.density_bounds(t)
        p = self.totals
        denom = np.sqrt(ub + p) + np.sqrt(p)
        terms = np.divide(ub, denom, out=np.zeros_like(ub), where=denom > 0)
        return terms.sum(axis=2)


class TableReward:
    """Reward looked up from a ``[t, y, x]`` table; bound defaults to the table itself."""

    def __init__(self, table, bound=None):
        self.table = np.asarray(table, dtype=float)
        self.bound = self.table if bound is None else np.asarray(bound, dtype=float)

    def __call__(self, prev, cur, t):
        return float(self.table[t, cur[1], cur[0]])

    def bound_layer(self, t):
        return self.bound[t]


@dataclass
class SingleAgentProblem:
    start: tuple[int, int]
    horizon: int
    heightmap: HeightMap
    motion: MotionModel
    reward: Reward
    gamma: float = DEFAULT_GAMMA
    constraints: Sequence[Constraint] = ()
    robot: int = 0
    _mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.start = (int(self.start[0]), int(self.start[1]))
        self._mask = traversable_mask(self.heightmap, self.motion)
        self._offsets = self.motion.offsets()  # (dy, dx)-major, so successors come out sorted by (y, x)
        self._vcon = {(c.cell, c.t) for c in self.constraints if c.is_vertex}
        self._econ = {(c.cell, c.to, c.t) for c in self.constraints if not c.is_vertex}
        self._disc = [self.gamma ** t for t in range(self.horizon + 1)]
        self._nbr_cache: dict = {}
        x, y = self.start
        if not self.heightmap.in_bounds(x, y) or not self._mask[y, x]:
            raise InfeasibleError(f"start {self.start} is not traversable")
        if (self.start, 0) in self._vcon:
            raise InfeasibleError(f"start {self.start} is constrained at t=0")

    def cells(self) -> list[tuple[int, int]]:
        """Traversable cells sorted by (y, x)."""
        ys, xs = np.nonzero(self._mask)
        return [(int(x), int(y)) for y, x in zip(ys, xs)]

    def _neighbors(self, cell) -> list[tuple[int, int]]:
        out = self._nbr_cache.get(cell)
        if out is None:
            w, h = self.heightmap.width, self.heightmap.height
            mask = self._mask
            out = []
            for dx, dy in self._offsets:
                x, y = cell[0] + dx, cell[1] + dy
                if 0 <= x < w and 0 <= y < h and mask[y, x]:
                    out.append((x, y))
            self._nbr_cache[cell] = out
        return out

    def successors(self, cell, t) -> list[tuple[int, int]]:
        """Feasible cells at t+1 from ``cell`` at t, sorted by (y, x)."""
        if t >= self.horizon:
            raise HorizonError(f"no successors at the horizon (t={t})")
        nbrs = self._neighbors(cell)
        if not self._vcon and not self._econ:
            return nbrs
        return [n for n in nbrs if (n, t + 1) not in self._vcon and (cell, n, t) not in self._econ]

    def discounted_value(self, path: Sequence) -> float:
        return sum(self._disc[t] * self.reward(tuple(path[t - 1]), tuple(path[t]), t) for t in range(1, len(path)))


def make_problem(robot: int, constraints, ledger: CoverageLedger | None, scenario: Scenario, *,
                 model=None, gamma=None, lambda_motion=0.0) -> SingleAgentProblem:
    model = model if model is not None else CoverageModel(scenario)
    if ledger is None:
        ledger = CoverageLedger(scenario.n_faces)
    reward = CoverageReward(model, ledger, lambda_motion)
    return SingleAgentProblem(
        start=scenario.robots[robot],
        horizon=scenario.horizon,
        heightmap=scenario.heightmap,
        motion=scenario.motion,
        reward=reward,
        gamma=scenario.discount if gamma is None else gamma,
        constraints=[c for c in constraints if c.robot == robot],
        robot=robot,
    )


def step_reward(robot: int, x, ledger: CoverageLedger, scenario, prev=None, lambda_motion=0.0) -> float:
    """Coverage gain at vertex x minus ``lambda_motion`` per cell moved, clamped at 0."""
    model = as_model(scenario)
    r = marginal_gain(model.densities(x[0], x[1], x[2]), ledger.totals)
    if lambda_motion and prev is not None:
        r -= lambda_motion * math.hypot(x[0] - prev[0], x[1] - prev[1])
    return max(0.0, r)


# --- value iteration ----------------------------------------------------------


def solve_value_iteration(prob: SingleAgentProblem) -> Trajectory:
    """Backward induction over every traversable (x, y, t), then a greedy rollout.

    Ties go to the successor with the smallest (y, x).
    """
    T = prob.horizon
    disc = prob._disc
    cells = prob.cells()
    value = {s: 0.0 for s in cells}
    for s, t in prob._vcon:
        if t == T and s in value:
            value[s] = -math.inf
    policy: list[dict] = [dict() for _ in range(T)]
    for t in range(T - 1, -1, -1):
        nv = {}
        pol = policy[t]
        for s in cells:
            if (s, t) in prob._vcon:
                nv[s] = -math.inf
                continue
            best, arg = -math.inf, None
            for s2 in prob.successors(s, t):
                v = value[s2]
                if v == -math.inf:
                    continue
                q = disc[t + 1] * prob.reward(s, s2, t + 1) + v
                if q > best:
                    best, arg = q, s2
            nv[s] = best
            pol[s] = arg
        value = nv
    if value[prob.start] == -math.inf:
        raise InfeasibleError(f"robot {prob.robot}: no feasible trajectory to the horizon")

    path = [prob.start]
    for t in range(T):
        path.append(policy[t][path[-1]])
    return Trajectory(prob.robot, tuple(path), value[prob.start], len(cells) * (T + 1))


# --- view search --------------------------------------------------------------


def _shift_max(m: np.ndarray, offsets) -> np.ndarray:
    """out[y, x] = max over offsets of m[y + dy, x + dx] (outside the grid is -inf)."""
    h, w = m.shape
    r = max(max(abs(dx), abs(dy)) for dx, dy in offsets)
    pad = np.full((h + 2 * r, w + 2 * r), -math.inf)
    pad[r:r + h, r:r + w] = m
    out = np.full_like(m, -math.inf)
    for dx, dy in offsets:
        np.maximum(out, pad[r + dy:r + dy + h, r + dx:r + dx + w], out=out)
    return out


def reward_to_go_bound(prob: SingleAgentProblem) -> list[np.ndarray]:
    """Relaxed optimal reward-to-go per (t, y, x), ignoring constraints.

    Built from per-cell reward upper bounds by the same backward recursion as
    value iteration, so it is consistent: h_t(s) >= gamma^(t+1) r(s') + h_{t+1}(s')
    for every successor s'.
    """
    T = prob.horizon
    mask = prob._mask
    h = [None] * (T + 1)
    h[T] = np.where(mask, 0.0, -math.inf)
    for t in range(T - 1, -1, -1):
        bound = np.asarray(prob.reward.bound_layer(t + 1), dtype=float)
        bound = bound * (1.0 + _BOUND_REL) + _BOUND_ABS
        m = np.where(mask, prob._disc[t + 1] * bound + h[t + 1], -math.inf)
        h[t] = np.where(mask, _shift_max(m, prob._offsets), -math.inf)
    return h


def solve_view_search(prob: SingleAgentProblem, heuristic: bool = True) -> Trajectory:
    """Best-first search on cumulative discounted reward plus a reward-to-go bound.

    A state is finalized the first time it is popped; successors already
    finalized, or whose cumulative reward does not beat the best one seen,
    are skipped. The search stops when the queue head sits at the horizon.
    With ``heuristic=False`` the bound is dropped (plain cumulative-reward
    ordering), which is fast but no longer guaranteed optimal.
    """
    T = prob.horizon
    disc = prob._disc
    if heuristic:
        hb = [layer.tolist() for layer in reward_to_go_bound(prob)]
    else:
        hb = [[[0.0] * prob.heightmap.width for _ in range(prob.heightmap.height)] for _ in range(T + 1)]

    x0, y0 = prob.start
    start = GridVertex(x0, y0, 0)
    tree: dict[GridVertex, SearchNode] = {start: SearchNode(0.0, start, (0, 0), None)}
    processed: set[GridVertex] = set()
    seq = 0
    queue = [(-hb[0][y0][x0], 0, y0, x0, seq, 0.0, start)]
    expanded = 0
    while queue:
        _, _, _, _, _, R, v = heapq.heappop(queue)
        if v in processed or R < tree[v].cum_reward:
            continue
        processed.add(v)
        expanded += 1
        if v.t == T:
            path = []
            node = v
            while node is not None:
                path.append((node.x, node.y))
                node = tree[node].parent
            path.reverse()
            return Trajectory(prob.robot, tuple(path), R, expanded)
        cell = (v.x, v.y)
        t1 = v.t + 1
        for nxt in prob.successors(cell, v.t):
            u = GridVertex(nxt[0], nxt[1], t1)
            if u in processed:
                continue
            hu = hb[t1][nxt[1]][nxt[0]]
            if hu == -math.inf:
                continue
            R1 = R + disc[t1] * prob.reward(cell, nxt, t1)
            old = tree.get(u)
            if old is not None and R1 <= old.cum_reward:
                continue
            tree[u] = SearchNode(R1, u, (nxt[0] - v.x, nxt[1] - v.y), v)
            seq += 1
            heapq.heappush(queue, (-(R1 + hu), -t1, nxt[1], nxt[0], seq, R1, u))
    raise InfeasibleError(f"robot {prob.robot}: search exhausted before the horizon")


def value_iteration(robot, constraints, ledger, scenario, **kw) -> Trajectory:
    return solve_value_iteration(make_problem(robot, constraints, ledger, scenario, **kw))


def view_search(robot, constraints, ledger, scenario, **kw) -> Trajectory:
    return solve_view_search(make_problem(robot, constraints, ledger, scenario, **kw))


SOLVERS = {
    "value-iteration": solve_value_iteration,
    "view-search": solve_view_search,
}


def get_solver(name: str):
    try:
        return SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None
