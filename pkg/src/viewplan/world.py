"""2.5D world: heightmap, motion graph, actor cuboids and the scenario file."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .camera import CameraIntrinsics
from .errors import BoundsError, HorizonError, ScenarioError


@dataclass(frozen=True)
class HeightMap:
    """Elevation grid, row-major: ``elevation[y, x]`` in meters.

    ``origin`` is the world position of the lower corner of cell (0, 0), so
    cell (x, y) spans ``origin + [x, x+1) * cell_size`` along each axis.
    """

    width: int
    height: int
    cell_size: float
    elevation: np.ndarray
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ScenarioError("heightmap dimensions must be >= 1")
        if not self.cell_size > 0:
            raise ScenarioError("cell_size must be positive")
        elev = np.array(self.elevation, dtype=float)
        if elev.size != self.width * self.height:
            raise ScenarioError(
                f"elevation has {elev.size} entries, expected {self.width * self.height}"
            )
        elev = elev.reshape(self.height, self.width)
        if not np.all(np.isfinite(elev)):
            raise ScenarioError("elevation must be finite")
        elev.setflags(write=False)
        object.__setattr__(self, "elevation", elev)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "cell_size", float(self.cell_size))

    @classmethod
    def flat(cls, width, height, cell_size=1.0, value=0.0, origin=(0.0, 0.0)):
        return cls(width, height, cell_size, np.full((height, width), float(value)), origin)

    def in_bounds(self, x, y) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def at(self, x, y) -> float:
        if not self.in_bounds(x, y):
            raise BoundsError(f"cell ({x}, {y}) outside {self.width}x{self.height} map")
        return float(self.elevation[y, x])

    def cell_center(self, x, y) -> tuple[float, float]:
        return (
            self.origin[0] + (x + 0.5) * self.cell_size,
            self.origin[1] + (y + 0.5) * self.cell_size,
        )

    def cell_of(self, px, py) -> tuple[int, int]:
        """Cell containing a world point (not clamped)."""
        return (
            math.floor((px - self.origin[0]) / self.cell_size),
            math.floor((py - self.origin[1]) / self.cell_size),
        )

    def contains_point(self, px, py) -> bool:
        return self.in_bounds(*self.cell_of(px, py))

    def extent(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return x0, y0, x0 + self.width * self.cell_size, y0 + self.height * self.cell_size


class GridVertex(NamedTuple):
    x: int
    y: int
    t: int


class Connectivity(str, Enum):
    FOUR = "4-connected"
    EIGHT = "8-connected"


@dataclass(frozen=True)
class MotionModel:
    max_step: int = 1
    flight_altitude: float = 6.0
    clearance: float = 1.0
    connectivity: Connectivity = Connectivity.EIGHT

    def __post_init__(self):
        object.__setattr__(self, "connectivity", Connectivity(self.connectivity))
        if self.max_step < 1:
            raise ScenarioError("max_step must be >= 1")
        if not self.flight_altitude > self.clearance >= 0:
            raise ScenarioError("need flight_altitude > clearance >= 0")

    def offsets(self) -> list[tuple[int, int]]:
        """Admissible (dx, dy) displacements including the wait action (0, 0)."""
        m = self.max_step
        out = []
        for dy in range(-m, m + 1):
            for dx in range(-m, m + 1):
                if self.connectivity is Connectivity.FOUR and abs(dx) + abs(dy) > m:
                    continue
                out.append((dx, dy))
        return out

    def allows(self, a, b) -> bool:
        dx, dy = abs(b[0] - a[0]), abs(b[1] - a[1])
        if self.connectivity is Connectivity.FOUR:
            return dx + dy <= self.max_step
        return max(dx, dy) <= self.max_step


class FaceGeometry(NamedTuple):
    actor: int
    index: int
    center: np.ndarray  # (3,) world meters
    normal: np.ndarray  # (3,) unit, horizontal
    area: float
    width: float
    height: float


FACES_PER_ACTOR = 4
# local-frame outward normals: +x, +y, -x, -y
_LOCAL_NORMALS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


@dataclass(frozen=True)
class ActorTrack:
    """Cuboid actor standing on the ground datum (z = 0) with one pose per timestep.

    ``footprint`` is (width along the local x axis, depth along local y).
    ``poses[t] = (x, y, yaw)`` in world meters / radians.
    """

    id: int
    footprint: tuple[float, float]
    body_height: float
    poses: np.ndarray

    def __post_init__(self):
        poses = np.array(self.poses, dtype=float)
        if poses.ndim != 2 or poses.shape[1] != 3 or len(poses) < 1:
            raise ScenarioError("poses must be a (T+1, 3) array of (x, y, yaw)")
        if not np.all(np.isfinite(poses)):
            raise ScenarioError("poses must be finite")
        w, d = (float(v) for v in self.footprint)
        if not (w > 0 and d > 0 and self.body_height > 0):
            raise ScenarioError("actor footprint and body_height must be positive")
        poses.setflags(write=False)
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "footprint", (w, d))
        object.__setattr__(self, "body_height", float(self.body_height))

    @property
    def horizon(self) -> int:
        return len(self.poses) - 1

    def pose(self, t) -> tuple[float, float, float]:
        if not 0 <= t <= self.horizon:
            raise HorizonError(f"t={t} outside [0, {self.horizon}]")
        x, y, yaw = self.poses[t]
        return float(x), float(y), float(yaw)

    def center(self, t) -> np.ndarray:
        x, y, _ = self.pose(t)
        return np.array([x, y, 0.5 * self.body_height])


def actor_faces_at(actor: ActorTrack, t: int) -> list[FaceGeometry]:
    x, y, yaw = actor.pose(t)
    c, s = math.cos(yaw), math.sin(yaw)
    w, d = actor.footprint
    h = actor.body_height
    faces = []
    for k, (lx, ly) in enumerate(_LOCAL_NORMALS):
        nx, ny = c * lx - s * ly, s * lx + c * ly
        half = 0.5 * (w if lx else d)
        side = d if lx else w
        center = np.array([x + nx * half, y + ny * half, 0.5 * h])
        faces.append(FaceGeometry(actor.id, k, center, np.array([nx, ny, 0.0]), side * h, side, h))
    return faces


def traversable(v, h: HeightMap, m: MotionModel) -> bool:
    return h.at(v[0], v[1]) + m.clearance <= m.flight_altitude


def traversable_mask(h: HeightMap, m: MotionModel) -> np.ndarray:
    """Boolean ``[y, x]`` grid of flyable cells."""
    return h.elevation + m.clearance <= m.flight_altitude


def neighbors(v: GridVertex, m: MotionModel, h: HeightMap, horizon: int) -> list[GridVertex]:
    """Traversable successors at t+1, sorted by (y, x)."""
    if v.t >= horizon:
        raise HorizonError(f"no successors at the horizon (t={v.t})")
    if not traversable(v, h, m):
        raise ScenarioError(f"vertex {tuple(v)} is not traversable")
    out = []
    for dx, dy in m.offsets():
        x, y = v.x + dx, v.y + dy
        if h.in_bounds(x, y) and traversable((x, y), h, m):
            out.append(GridVertex(x, y, v.t + 1))
    out.sort(key=lambda u: (u.y, u.x))
    return out


@dataclass(frozen=True)
class Scenario:
    heightmap: HeightMap
    motion: MotionModel
    horizon: int
    robots: tuple[tuple[int, int], ...]
    actors: tuple[ActorTrack, ...]
    camera: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    discount: float = 0.95
    seed: int = 0

    def __post_init__(self):
        robots = tuple((int(x), int(y)) for x, y in self.robots)
        actors = tuple(self.actors)
        object.__setattr__(self, "robots", robots)
        object.__setattr__(self, "actors", actors)
        if self.horizon < 1:
            raise ScenarioError("horizon must be >= 1")
        if not 0 < self.discount <= 1:
            raise ScenarioError("discount must lie in (0, 1]")
        if self.seed < 0:
            raise ScenarioError("seed must be unsigned")
        if len(set(robots)) != len(robots):
            raise ScenarioError("robot starts must be pairwise distinct")
        for r in robots:
            if not self.heightmap.in_bounds(*r):
                raise ScenarioError(f"robot start {r} out of bounds")
            if not traversable(r, self.heightmap, self.motion):
                raise ScenarioError(f"robot start {r} is not traversable")
        for j, a in enumerate(actors):
            if a.id != j:
                raise ScenarioError("actor ids must equal their list index")
            if a.horizon != self.horizon:
                raise ScenarioError(f"actor {j} has {len(a.poses)} poses, expected {self.horizon + 1}")
            for x, y, _ in a.poses:
                if not self.heightmap.contains_point(x, y):
                    raise ScenarioError(f"actor {j} pose ({x}, {y}) outside the heightmap")
            if a.body_height >= self.motion.flight_altitude:
                raise ScenarioError("robots must fly above actors (altitude > body_height)")

    @property
    def n_robots(self) -> int:
        return len(self.robots)

    @property
    def n_actors(self) -> int:
        return len(self.actors)

    @property
    def n_faces(self) -> int:
        return FACES_PER_ACTOR * len(self.actors)

    def faces_at(self, t) -> list[FaceGeometry]:
        return [f for a in self.actors for f in actor_faces_at(a, t)]

    def camera_position(self, v) -> np.ndarray:
        cx, cy = self.heightmap.cell_center(v[0], v[1])
        return np.array([cx, cy, self.motion.flight_altitude])

    # --- scenario file ------------------------------------------------------

    def to_dict(self) -> dict:
        hm = self.heightmap
        return {
            "heightmap": {
                "width": hm.width,
                "height": hm.height,
                "cell_size": hm.cell_size,
                "elevation": [float(v) for v in hm.elevation.ravel()],
                "origin": list(hm.origin),
            },
            "motion": {
                "max_step": self.motion.max_step,
                "flight_altitude": self.motion.flight_altitude,
                "clearance": self.motion.clearance,
                "connectivity": self.motion.connectivity.value,
            },
            "horizon": self.horizon,
            "robots": [list(r) for r in self.robots],
            "actors": [
                {
                    "footprint": list(a.footprint),
                    "body_height": a.body_height,
                    "waypoints": [[float(x), float(y), float(yaw), t] for t, (x, y, yaw) in enumerate(a.poses)],
                }
                for a in self.actors
            ],
            "camera": self.camera.to_dict(),
            "discount": self.discount,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        _check_keys(d, {"heightmap", "motion", "horizon", "robots", "actors", "camera", "discount", "seed"}, "scenario")
        hm_d = d["heightmap"]
        _check_keys(hm_d, {"width", "height", "cell_size", "elevation", "origin"}, "heightmap")
        hm = HeightMap(hm_d["width"], hm_d["height"], hm_d["cell_size"], hm_d["elevation"], tuple(hm_d["origin"]))
        m_d = d["motion"]
        _check_keys(m_d, {"max_step", "flight_altitude", "clearance", "connectivity"}, "motion")
        motion = MotionModel(int(m_d["max_step"]), float(m_d["flight_altitude"]), float(m_d["clearance"]),
                             _parse_connectivity(m_d["connectivity"]))
        horizon = int(d["horizon"])
        actors = []
        for j, a_d in enumerate(d["actors"]):
            _check_keys(a_d, {"footprint", "body_height", "waypoints"}, f"actors[{j}]")
            poses = interpolate_waypoints(a_d["waypoints"], horizon)
            actors.append(ActorTrack(j, tuple(a_d["footprint"]), float(a_d["body_height"]), poses))
        return cls(
            heightmap=hm,
            motion=motion,
            horizon=horizon,
            robots=tuple(tuple(r) for r in d["robots"]),
            actors=tuple(actors),
            camera=CameraIntrinsics.from_dict(d["camera"]),
            discount=float(d["discount"]),
            seed=int(d["seed"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_json(fh.read())


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ScenarioError(f"{where}: expected an object")
    unknown = set(d) - allowed
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")
    missing = allowed - set(d)
    if missing:
        raise ScenarioError(f"{where}: missing keys {sorted(missing)}")


def _parse_connectivity(value) -> Connectivity:
    if value in (4, "4"):
        return Connectivity.FOUR
    if value in (8, "8"):
        return Connectivity.EIGHT
    try:
        return Connectivity(value)
    except ValueError:
        raise ScenarioError(f"unknown connectivity {value!r}") from None


def interpolate_waypoints(waypoints: Sequence[Sequence[float]], horizon: int) -> np.ndarray:
    """Per-timestep (x, y, yaw) from ``[x, y, yaw, t]`` waypoints spanning [0, horizon]."""
    wp = np.array(waypoints, dtype=float)
    if wp.ndim != 2 or wp.shape[1] != 4 or len(wp) < 1:
        raise ScenarioError("waypoints must be a list of [x, y, yaw, t]")
    ts = wp[:, 3]
    if np.any(np.diff(ts) <= 0):
        raise ScenarioError("waypoint times must be strictly increasing")
    if ts[0] > 0 or ts[-1] < horizon:
        raise ScenarioError("waypoints must cover t = 0 .. horizon")
    steps = np.arange(horizon + 1, dtype=float)
    return np.stack([np.interp(steps, ts, wp[:, k]) for k in range(3)], axis=1)
