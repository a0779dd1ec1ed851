"""Seeded scenario generators: corridor, bottleneck and random clutter."""

from __future__ import annotations

import math

import numpy as np

from .camera import CameraIntrinsics
from .errors import ScenarioError
from .world import ActorTrack, HeightMap, MotionModel, Scenario, interpolate_waypoints, traversable_mask

WALL_HEIGHT = 12.0
ACTOR_FOOTPRINT = (0.8, 0.8)
ACTOR_HEIGHT = 1.8


def _polyline_track(points, horizon, speed):
    """Per-timestep poses moving along ``points`` at constant speed, then holding still."""
    pts = [np.asarray(p, dtype=float) for p in points]
    times, yaws = [0.0], []
    for a, b in zip(pts, pts[1:]):
        times.append(times[-1] + float(np.hypot(*(b - a))) / speed)
        yaws.append(math.atan2(b[1] - a[1], b[0] - a[0]))
    yaws = np.unwrap(yaws + yaws[-1:])
    wps = [[p[0], p[1], yaw, t] for p, yaw, t in zip(pts, yaws, times)]
    if times[-1] < horizon:
        wps.append([pts[-1][0], pts[-1][1], yaws[-1], float(horizon)])
    return interpolate_waypoints(wps, horizon)


def _pick_starts(rng, hm, motion, candidates, n):
    mask = traversable_mask(hm, motion)
    cells = sorted({c for c in candidates if hm.in_bounds(*c) and mask[c[1], c[0]]}, key=lambda c: (c[1], c[0]))
    if len(cells) < n:
        raise ScenarioError(f"only {len(cells)} free start cells for {n} robots")
    idx = rng.choice(len(cells), size=n, replace=False)
    return tuple(cells[int(k)] for k in idx)


def generate_corridor(width=40, height=21, corridor_length=10, corridor_width=1, wall_thickness=2,
                      horizon=8, n_robots=2, n_actors=2, seed=0, actor_speed=1.0, start_margin=3,
                      discount=0.95, flight_altitude=6.0, clearance=1.0, camera=None) -> Scenario:
    """Straight passage between two walls; actors walk through it in +x, robots start outside.

    Robots are drawn from the open cells within ``start_margin`` columns of
    the corridor mouths on either side.
    """
    if corridor_width < 1:
        raise ScenarioError("corridor_width must be >= 1")
    if corridor_length > width - 2:
        raise ScenarioError("corridor longer than the map")
    if corridor_width + 2 * wall_thickness > height:
        raise ScenarioError("corridor and walls do not fit the map height")
    rng = np.random.default_rng(seed)
    elev = np.zeros((height, width))
    x0 = (width - corridor_length) // 2
    x1 = x0 + corridor_length  # exclusive
    y0 = (height - corridor_width) // 2
    y1 = y0 + corridor_width
    elev[y0 - wall_thickness:y0, x0:x1] = WALL_HEIGHT
    elev[y1:y1 + wall_thickness, x0:x1] = WALL_HEIGHT
    hm = HeightMap(width, height, 1.0, elev)
    motion = MotionModel(1, flight_altitude, clearance, "8-connected")

    yc = 0.5 * (y0 + y1)
    actors = []
    for j in range(n_actors):
        lane = yc + ((j % corridor_width) - 0.5 * (corridor_width - 1)) if corridor_width > 1 else yc
        start_x = x0 + 1.0 - 1.5 * j
        end_x = start_x + actor_speed * horizon
        poses = _polyline_track([(start_x, lane), (end_x, lane)], horizon, actor_speed)
        actors.append(ActorTrack(j, ACTOR_FOOTPRINT, ACTOR_HEIGHT, poses))

    cand = [(x, y) for y in range(y0 - wall_thickness, y1 + wall_thickness)
            for x in list(range(max(0, x0 - start_margin), x0)) + list(range(x1, min(width, x1 + start_margin)))]
    robots = _pick_starts(rng, hm, motion, cand, n_robots)
    return Scenario(hm, motion, horizon, robots, tuple(actors), camera or CameraIntrinsics(), discount, seed)


def generate_bottleneck(width=22, height=13, neck_width=2, feeder_width=1, horizon=11, n_robots=4, n_actors=4,
                        seed=0, actor_speed=1.0, discount=0.95, flight_altitude=6.0, clearance=1.0,
                        camera=None) -> Scenario:
    """Two feeder corridors joined by a merge chamber that empties into a single neck.

    Actors are split between the feeders and converge into the neck; robots
    start in the open area behind the feeders.
    """
    if neck_width < 1 or feeder_width < 1:
        raise ScenarioError("corridor widths must be >= 1")
    if height < 2 * feeder_width + neck_width + 6 or width < 16:
        raise ScenarioError("map too small for two feeders and a neck")
    rng = np.random.default_rng(seed)
    elev = np.full((height, width), WALL_HEIGHT)
    open_w = 3
    fx0, fx1 = open_w, width // 2 - 3  # feeders [fx0, fx1)
    cx0, cx1 = fx1, fx1 + 3  # merge chamber
    nx0, nx1 = cx1, width - open_w  # neck
    top = (2, 2 + feeder_width)
    bot = (height - 2 - feeder_width, height - 2)
    ny0 = (height - neck_width) // 2
    neck = (ny0, ny0 + neck_width)
    elev[:, :open_w] = 0.0
    elev[:, width - open_w:] = 0.0
    elev[top[0]:top[1], fx0:fx1] = 0.0
    elev[bot[0]:bot[1], fx0:fx1] = 0.0
    elev[top[0]:bot[1], cx0:cx1] = 0.0
    elev[neck[0]:neck[1], nx0:nx1] = 0.0
    hm = HeightMap(width, height, 1.0, elev)
    motion = MotionModel(1, flight_altitude, clearance, "8-connected")

    ymid = 0.5 * (neck[0] + neck[1])
    chamber_x = 0.5 * (cx0 + cx1)
    actors = []
    for j in range(n_actors):
        feeder = top if j % 2 == 0 else bot
        rank = j // 2
        fy = 0.5 * (feeder[0] + feeder[1])
        sx = fx0 + 1.5 - 1.5 * rank
        lane_off = 0.0 if neck_width == 1 else (0.5 if j % 2 else -0.5) * min(1.0, (neck_width - 1) / 2)
        pts = [(sx, fy), (chamber_x, fy), (nx0 + 0.5, ymid + lane_off), (width - 0.5, ymid + lane_off)]
        poses = _polyline_track(pts, horizon, actor_speed)
        actors.append(ActorTrack(j, ACTOR_FOOTPRINT, ACTOR_HEIGHT, poses))

    cand = [(x, y) for y in range(height) for x in range(open_w)]
    robots = _pick_starts(rng, hm, motion, cand, n_robots)
    return Scenario(hm, motion, horizon, robots, tuple(actors), camera or CameraIntrinsics(), discount, seed)


def generate_clutter(width=8, height=8, horizon=5, n_robots=1, n_actors=1, obstacle_density=0.2, seed=0,
                     discount=0.95, flight_altitude=6.0, clearance=1.0, camera=None) -> Scenario:
    """Random obstacle field with random-walk actors; obstacles mix no-fly and occluding-only heights."""
    rng = np.random.default_rng(seed)
    elev = np.zeros((height, width))
    blocked = rng.random((height, width)) < obstacle_density
    heights = rng.choice([3.0, WALL_HEIGHT], size=(height, width))
    elev[blocked] = heights[blocked]
    hm = HeightMap(width, height, 1.0, elev)
    motion = MotionModel(1, flight_altitude, clearance, "8-connected")
    actors = []
    for j in range(n_actors):
        p = rng.uniform([0.5, 0.5], [width - 0.5, height - 0.5])
        heading = rng.uniform(-math.pi, math.pi)
        poses = []
        for _ in range(horizon + 1):
            poses.append((p[0], p[1], heading))
            heading += rng.normal(0.0, 0.4)
            p = np.clip(p + 0.8 * np.array([math.cos(heading), math.sin(heading)]), 0.5, [width - 0.5, height - 0.5])
        actors.append(ActorTrack(j, ACTOR_FOOTPRINT, ACTOR_HEIGHT, np.array(poses)))
    cand = [(x, y) for y in range(height) for x in range(width)]
    robots = _pick_starts(rng, hm, motion, cand, n_robots)
    return Scenario(hm, motion, horizon, robots, tuple(actors), camera or CameraIntrinsics(), discount, seed)


GENERATORS = {
    "corridor": generate_corridor,
    "bottleneck": generate_bottleneck,
    "clutter": generate_clutter,
}
