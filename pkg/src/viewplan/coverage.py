"""Pixel ledger and the square-root saturated coverage objective."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .camera import camera_pose, density_upper_bound, face_pixel_density
from .errors import DoubleCommitError, ShapeError
from .world import FACES_PER_ACTOR, Scenario, actor_faces_at


def face_index(j: int, f: int) -> int:
    return j * FACES_PER_ACTOR + f


def cov(x, j: int, f: int, scenario: Scenario) -> float:
    """Pixel density on face f of actor j seen from robot vertex x (uncached)."""
    t = x[2]
    face = actor_faces_at(scenario.actors[j], t)[f]
    return face_pixel_density(camera_pose(x, scenario), scenario.camera, face, scenario, t)


class CoverageModel:
    """Memoized per-vertex face densities for one scenario.

    ``densities(x, y, t)`` depends only on the camera cell and time, never on
    which robot stands there, so one model can serve every robot and every
    solver call of a planning run.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self._cache: dict[tuple[int, int, int], np.ndarray] = {}
        self._faces = [scenario.faces_at(t) for t in range(scenario.horizon + 1)]
        self._bounds: dict[int, np.ndarray] = {}
        self.evaluations = 0

    @property
    def n_faces(self) -> int:
        return self.scenario.n_faces

    def densities(self, x: int, y: int, t: int) -> np.ndarray:
        key = (x, y, t)
        out = self._cache.get(key)
        if out is None:
            self.evaluations += 1
            sc = self.scenario
            pose = camera_pose(key, sc)
            out = np.array([face_pixel_density(pose, sc.camera, face, sc, t) for face in self._faces[t]])
            out.setflags(write=False)
            self._cache[key] = out
        return out

    def cov(self, x, j, f) -> float:
        return float(self.densities(x[0], x[1], x[2])[face_index(j, f)])

    def density_bounds(self, t: int) -> np.ndarray:
        """Upper bounds on every cell's face densities at time t, shape (H, W, n_faces)."""
        out = self._bounds.get(t)
        if out is None:
            hm = self.scenario.heightmap
            ys, xs = np.mgrid[0:hm.height, 0:hm.width]
            pos = np.stack([
                hm.origin[0] + (xs.ravel() + 0.5) * hm.cell_size,
                hm.origin[1] + (ys.ravel() + 0.5) * hm.cell_size,
                np.full(xs.size, self.scenario.motion.flight_altitude),
            ], axis=1)
            faces = self._faces[t]
            if faces:
                centers = np.array([fc.center for fc in faces])
                normals = np.array([fc.normal for fc in faces])
                target = np.mean([a.center(t) for a in self.scenario.actors], axis=0)
                aims = target[None, :] - pos
                aims /= np.maximum(np.linalg.norm(aims, axis=1, keepdims=True), 1e-300)
                ub = density_upper_bound(pos, centers, normals, self.scenario.camera, aims, hm)
            else:
                ub = np.zeros((len(pos), 0))
            out = ub.reshape(hm.height, hm.width, -1)
            out.setflags(write=False)
            self._bounds[t] = out
        return out


def as_model(obj) -> CoverageModel:
    return obj if isinstance(obj, CoverageModel) else CoverageModel(obj)


def marginal_gain(densities, totals) -> float:
    """sum_f sqrt(c_f + P_f) - sqrt(P_f), evaluated as c / (sqrt(c+P) + sqrt(P)).

    The rationalized form is exactly non-increasing in P under IEEE rounding,
    which keeps diminishing returns free of cancellation noise.
    """
    c = np.asarray(densities, dtype=float)
    p = np.asarray(totals, dtype=float)
    denom = np.sqrt(c + p) + np.sqrt(p)
    terms = np.divide(c, denom, out=np.zeros_like(c), where=denom > 0)
    return float(terms.sum())


class CoverageLedger:
    """Observed pixel densities keyed by (robot, actor, face, timestep).

    Per-face totals are re-summed with ``math.fsum`` whenever a face changes,
    so they are independent of commit order and match a fresh recomputation
    exactly.
    """

    def __init__(self, n_faces: int):
        self.n_faces = n_faces
        self._faces: list[dict[tuple[int, int], float]] = [{} for _ in range(n_faces)]
        self._totals = np.zeros(n_faces)

    def __len__(self):
        return sum(len(d) for d in self._faces)

    def copy(self) -> "CoverageLedger":
        out = CoverageLedger(self.n_faces)
        out._faces = [dict(d) for d in self._faces]
        out._totals = self._totals.copy()
        return out

    @property
    def totals(self) -> np.ndarray:
        view = self._totals.view()
        view.setflags(write=False)
        return view

    def entries(self) -> dict[tuple[int, int, int, int], float]:
        out = {}
        for k, d in enumerate(self._faces):
            j, f = divmod(k, FACES_PER_ACTOR)
            for (i, t), v in d.items():
                out[(i, j, f, t)] = v
        return out

    def covp(self, j: int, f: int) -> float:
        return float(self._totals[face_index(j, f)])

    def add(self, robot: int, j: int, f: int, t: int, density: float):
        if not density >= 0:
            raise ValueError(f"pixel density must be non-negative, got {density}")
        k = face_index(j, f)
        d = self._faces[k]
        if (robot, t) in d:
            raise DoubleCommitError(f"entry (robot={robot}, actor={j}, face={f}, t={t}) already committed")
        d[(robot, t)] = float(density)
        self._totals[k] = math.fsum(d.values())

    def commit_densities(self, robot: int, t: int, densities: Sequence[float]):
        for k, c in enumerate(densities):
            if c > 0:
                j, f = divmod(k, FACES_PER_ACTOR)
                self.add(robot, j, f, t, c)

    def commit(self, robot: int, x, model) -> "CoverageLedger":
        model = as_model(model)
        self.commit_densities(robot, x[2], model.densities(x[0], x[1], x[2]))
        return self

    def commit_path(self, robot: int, path: Sequence, model) -> "CoverageLedger":
        model = as_model(model)
        for t, (x, y) in enumerate(path):
            self.commit_densities(robot, t, model.densities(x, y, t))
        return self

    def remove_robot(self, robot: int) -> "CoverageLedger":
        for k, d in enumerate(self._faces):
            stale = [key for key in d if key[0] == robot]
            if stale:
                for key in stale:
                    del d[key]
                self._totals[k] = math.fsum(d.values())
        return self

    def robots(self) -> set[int]:
        return {i for d in self._faces for (i, _) in d}

    def check(self) -> bool:
        """Every cached total equals an fsum of its entries, and entries are >= 0."""
        for k, d in enumerate(self._faces):
            if any(v < 0 for v in d.values()):
                return False
            if self._totals[k] != math.fsum(d.values()):
                return False
        return True

    def value(self) -> float:
        return math.fsum(math.sqrt(p) for p in self._totals)


def covp(ledger: CoverageLedger, j: int, f: int) -> float:
    return ledger.covp(j, f)


def covm(x, ledger: CoverageLedger, model) -> float:
    """Incremental coverage gain of observing from vertex x given the ledger."""
    model = as_model(model)
    return marginal_gain(model.densities(x[0], x[1], x[2]), ledger.totals)


def commit(ledger: CoverageLedger, robot: int, x, model) -> CoverageLedger:
    return ledger.commit(robot, x, model)


def remove_robot(ledger: CoverageLedger, robot: int) -> CoverageLedger:
    return ledger.remove_robot(robot)


def _check_shape(paths, horizon=None):
    lengths = {len(p) for p in paths}
    if len(lengths) > 1:
        raise ShapeError(f"ragged joint path, lengths {sorted(lengths)}")
    if horizon is not None and lengths and lengths != {horizon + 1}:
        raise ShapeError(f"paths must have length {horizon + 1}")


def build_ledger(paths: Sequence[Sequence], model) -> CoverageLedger:
    """Fresh ledger with every robot committed in canonical (t, then robot) order."""
    model = as_model(model)
    _check_shape(paths, model.scenario.horizon)
    ledger = CoverageLedger(model.n_faces)
    n_t = len(paths[0]) if paths else 0
    for t in range(n_t):
        for i, p in enumerate(paths):
            ledger.commit_densities(i, t, model.densities(p[t][0], p[t][1], t))
    return ledger


def objective(paths: Sequence[Sequence], model) -> float:
    """g = sum over faces of sqrt(total observed density)."""
    return build_ledger(paths, model).value()


def marginal_trace(paths: Sequence[Sequence], model) -> list[float]:
    """Per-timestep joint marginal gains streamed in canonical order; sums to ``objective``."""
    model = as_model(model)
    _check_shape(paths, model.scenario.horizon)
    ledger = CoverageLedger(model.n_faces)
    out = []
    n_t = len(paths[0]) if paths else model.scenario.horizon + 1
    for t in range(n_t):
        gain = 0.0
        for i, p in enumerate(paths):
            c = model.densities(p[t][0], p[t][1], t)
            gain += marginal_gain(c, ledger.totals)
            ledger.commit_densities(i, t, c)
        out.append(gain)
    return out
