"""Pinhole camera coverage: frustum gating, pixels-per-area and occlusion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateGeometryError, ScenarioError

@dataclass(frozen=True)
class CameraIntrinsics:
    focal_px: float = 400.0
    image_width: int = 640
    image_height: int = 480

    def __post_init__(self):
        if not self.focal_px > 0:
            raise ScenarioError("focal_px must be positive")
        if self.image_width < 1 or self.image_height < 1:
            raise ScenarioError("image dimensions must be >= 1")

    @property
    def hfov(self) -> float:
        return 2.0 * math.atan(self.image_width / (2.0 * self.focal_px))

    @property
    def vfov(self) -> float:
        return 2.0 * math.atan(self.image_height / (2.0 * self.focal_px))

    def to_dict(self) -> dict:
        return {"focal_px": self.focal_px, "image_width": self.image_width, "image_height": self.image_height}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        unknown = set(d) - {"focal_px", "image_width", "image_height"}
        if unknown:
            raise ScenarioError(f"camera: unknown keys {sorted(unknown)}")
        return cls(float(d["focal_px"]), int(d["image_width"]), int(d["image_height"]))


@dataclass(frozen=True)
class CameraPose:
    position: np.ndarray
    aim: np.ndarray

    def __post_init__(self):
        aim = np.asarray(self.aim, dtype=float)
        if abs(np.linalg.norm(aim) - 1.0) > 1e-9:
            raise DegenerateGeometryError("aim must be unit length")
        position = np.asarray(self.position, dtype=float)
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "aim", aim)

    @cached_property
    def _axes(self):
        fx, fy, fz = (float(v) for v in self.aim)
        n = math.hypot(fx, fy)
        if n < 1e-12:
            rx, ry = 1.0, 0.0
        else:
            rx, ry = fy / n, -fx / n
        # up = right x forward
        ux, uy, uz = ry * fz, -rx * fz, rx * fy - ry * fx
        return (fx, fy, fz), (rx, ry, 0.0), (ux, uy, uz)

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(forward, right, up) camera axes; right is horizontal unless looking straight down."""
        return tuple(np.array(a) for a in self._axes)


class Cuboid(NamedTuple):
    x: float
    y: float
    yaw: float
    width: float
    depth: float
    height: float


def actor_cuboid(actor, t) -> Cuboid:
    x, y, yaw = actor.pose(t)
    return Cuboid(x, y, yaw, actor.footprint[0], actor.footprint[1], actor.body_height)


def aim_at(position, actors: Sequence, t: int) -> CameraPose:
    """Point the gimbal at the centroid of all actor centers (half body height)."""
    if not actors:
        raise ValueError("aim_at needs at least one actor")
    target = np.mean([a.center(t) for a in actors], axis=0)
    position = np.asarray(position, dtype=float)
    ray = target - position
    n = np.linalg.norm(ray)
    if n == 0.0:
        raise DegenerateGeometryError("camera coincides with the actor centroid")
    return CameraPose(position, ray / n)


def camera_pose(v, scenario) -> CameraPose:
    return aim_at(scenario.camera_position(v), scenario.actors, v[2])


def project(pose: CameraPose, cam: CameraIntrinsics, point) -> tuple[float, float, float] | None:
    """Image-plane offsets (u, v) from the principal point and depth, or None if behind."""
    fwd, right, up = pose._axes
    px, py, pz = pose.position
    rx, ry, rz = float(point[0]) - px, float(point[1]) - py, float(point[2]) - pz
    depth = rx * fwd[0] + ry * fwd[1] + rz * fwd[2]
    if depth <= 0.0:
        return None
    u = cam.focal_px * (rx * right[0] + ry * right[1]) / depth
    v = cam.focal_px * (rx * up[0] + ry * up[1] + rz * up[2]) / depth
    return u, v, depth


def in_frustum(pose: CameraPose, cam: CameraIntrinsics, point) -> bool:
    p = project(pose, cam, point)
    if p is None:
        return False
    u, v, _ = p
    return abs(u) <= 0.5 * cam.image_width and abs(v) <= 0.5 * cam.image_height


def pixel_density(pose: CameraPose, cam: CameraIntrinsics, center, normal) -> float:
    """focal^2 * cos(incidence) / d^2 for a face, with frustum and backface gating only."""
    ray = np.asarray(center, dtype=float) - pose.position
    d2 = float(ray @ ray)
    if d2 == 0.0:
        raise DegenerateGeometryError("camera coincides with face centroid")
    d = math.sqrt(d2)
    cos = max(0.0, -float(np.asarray(normal) @ ray) / d)
    if cos == 0.0 or not in_frustum(pose, cam, center):
        return 0.0
    return cam.focal_px ** 2 * cos / d2


def face_pixel_density(pose: CameraPose, cam: CameraIntrinsics, face, world, t: int) -> float:
    value = pixel_density(pose, cam, face.center, face.normal)
    if value == 0.0:
        return 0.0
    others = [actor_cuboid(a, t) for a in world.actors if a.id != face.actor]
    if occlusion_test(pose.position, face.center, world.heightmap, others):
        return 0.0
    return value


def occlusion_test(start, end, heightmap, other_actors: Sequence[Cuboid] = ()) -> bool:
    """True if the segment dips below terrain in any cell it crosses or cuts an actor box."""
    a = tuple(float(v) for v in start)
    b = tuple(float(v) for v in end)
    # canonical direction so that blocked(a, b) == blocked(b, a) bit for bit
    if b < a:
        a, b = b, a
    if terrain_blocks(a, b, heightmap):
        return True
    return any(segment_hits_cuboid(a, b, c) for c in other_actors)


def grid_crossings(a, b, heightmap) -> list[float]:
    """Sorted segment parameters in [0, 1] where the xy projection crosses cell borders."""
    cs = heightmap.cell_size
    ox, oy = heightmap.origin
    params = [0.0, 1.0]
    for axis, o in ((0, ox), (1, oy)):
        g0 = (a[axis] - o) / cs
        g1 = (b[axis] - o) / cs
        if g0 == g1:
            continue
        lo, hi = min(g0, g1), max(g0, g1)
        for k in range(math.floor(lo) + 1, math.ceil(hi)):
            params.append((k - g0) / (g1 - g0))
    return sorted(set(params))


def terrain_blocks(a, b, heightmap) -> bool:
    # Walk the cells between consecutive border crossings; z is linear in the
    # segment parameter so its minimum over a cell is at one of the two ends.
    elev = heightmap.elevation
    w, h = heightmap.width, heightmap.height
    params = grid_crossings(a, b, heightmap)
    dz = b[2] - a[2]
    for s0, s1 in zip(params, params[1:]):
        sm = 0.5 * (s0 + s1)
        cx, cy = heightmap.cell_of(a[0] + sm * (b[0] - a[0]), a[1] + sm * (b[1] - a[1]))
        cx = min(max(cx, 0), w - 1)
        cy = min(max(cy, 0), h - 1)
        zmin = a[2] + (s0 if dz >= 0 else s1) * dz
        if zmin < elev[cy, cx]:
            return True
    return False


def segment_hits_cuboid(a, b, box: Cuboid) -> bool:
    """Slab test in the box frame; grazing contact (zero-length overlap) does not count."""
    c, s = math.cos(box.yaw), math.sin(box.yaw)

    def local(p):
        dx, dy = p[0] - box.x, p[1] - box.y
        return (c * dx + s * dy, -s * dx + c * dy, p[2])

    p0, p1 = local(a), local(b)
    lo = (-0.5 * box.width, -0.5 * box.depth, 0.0)
    hi = (0.5 * box.width, 0.5 * box.depth, box.height)
    t0, t1 = 0.0, 1.0
    for k in range(3):
        d = p1[k] - p0[k]
        if d == 0.0:
            if not lo[k] < p0[k] < hi[k]:
                return False
            continue
        ta, tb = (lo[k] - p0[k]) / d, (hi[k] - p0[k]) / d
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 >= t1:
            return False
    return True


def density_upper_bound(positions: np.ndarray, centers: np.ndarray, normals: np.ndarray, cam: CameraIntrinsics,
                        aims: np.ndarray | None = None, heightmap=None, samples_per_cell: float = 1.0) -> np.ndarray:
    """Vectorized optimistic pixel density, shape (n_positions, n_faces).

    Never smaller than ``face_pixel_density`` for the same geometry: the
    frustum test is widened slightly, actor boxes are ignored, and terrain
    only blocks when a sampled point of the sight line lies clearly inside a
    cell and clearly below its top (which implies the exact grid walk blocks
    too).
    """
    ray = centers[None, :, :] - positions[:, None, :]
    d2 = np.einsum("pfk,pfk->pf", ray, ray)
    d2 = np.maximum(d2, 1e-300)
    cos = np.maximum(0.0, -np.einsum("pfk,fk->pf", ray, normals) / np.sqrt(d2))
    # slack covers rounding differences against the scalar evaluation
    out = cam.focal_px ** 2 * cos / d2 * (1.0 + 1e-9)

    if aims is not None:
        fx, fy, fz = aims[:, 0:1], aims[:, 1:2], aims[:, 2:3]
        n = np.hypot(fx, fy)
        flat = n < 1e-12
        safe = np.where(flat, 1.0, n)
        rx = np.where(flat, 1.0, fy / safe)
        ry = np.where(flat, 0.0, -fx / safe)
        ux, uy, uz = ry * fz, -rx * fz, rx * fy - ry * fx
        depth = ray[..., 0] * fx + ray[..., 1] * fy + ray[..., 2] * fz
        eps = 1e-6
        behind = depth < -eps
        pos_depth = np.maximum(depth, eps)
        u = cam.focal_px * (ray[..., 0] * rx + ray[..., 1] * ry) / pos_depth
        v = cam.focal_px * (ray[..., 0] * ux + ray[..., 1] * uy + ray[..., 2] * uz) / pos_depth
        outside = (depth > eps) & ((np.abs(u) > 0.5 * cam.image_width * (1 + eps))
                                   | (np.abs(v) > 0.5 * cam.image_height * (1 + eps)))
        out[behind | outside] = 0.0

    if heightmap is not None:
        pi, fi = np.nonzero(out > 0)
        if pi.size:
            out[pi, fi] = np.where(_sampled_terrain_block(positions[pi], centers[fi], heightmap, samples_per_cell),
                                   0.0, out[pi, fi])
    return out


def _sampled_terrain_block(starts, ends, heightmap, samples_per_cell):
    """Per-row test that some sample of segment start->end lies clearly below a cell top."""
    cs = heightmap.cell_size
    span = np.hypot(ends[:, 0] - starts[:, 0], ends[:, 1] - starts[:, 1]) / cs
    k = max(2, int(math.ceil(samples_per_cell * float(span.max()))) + 1)
    s = (np.arange(1, k) / k)[None, :]
    z = starts[:, 2:3] + s * (ends[:, 2:3] - starts[:, 2:3])
    # samples above the tallest cell can never block
    near = z < float(heightmap.elevation.max()) - 1e-9
    rows, cols = np.nonzero(near)
    hit = np.zeros(len(starts), dtype=bool)
    if rows.size == 0:
        return hit
    sv = s[0, cols]
    gx = (starts[rows, 0] + sv * (ends[rows, 0] - starts[rows, 0]) - heightmap.origin[0]) / cs
    gy = (starts[rows, 1] + sv * (ends[rows, 1] - starts[rows, 1]) - heightmap.origin[1]) / cs
    ix, iy = np.floor(gx), np.floor(gy)
    margin = 1e-6
    ok = ((gx - ix > margin) & (ix + 1 - gx > margin) & (gy - iy > margin) & (iy + 1 - gy > margin)
          & (ix >= 0) & (ix < heightmap.width) & (iy >= 0) & (iy < heightmap.height))
    rows, ix, iy, zz = rows[ok], ix[ok].astype(int), iy[ok].astype(int), z[rows[ok], cols[ok]]
    below = zz < heightmap.elevation[iy, ix] - 1e-9
    hit[rows[below]] = True
    return hit
