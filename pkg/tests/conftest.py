import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from viewplan import ActorTrack, HeightMap, MotionModel, Scenario

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_scenario(width=6, height=6, horizon=3, robots=((0, 0),), actors=None, elevation=None, **kw):
    """Small hand-built scenario; by default one actor standing still mid-map."""
    elev = np.zeros((height, width)) if elevation is None else np.asarray(elevation, dtype=float)
    hm = HeightMap(width, height, 1.0, elev)
    if actors is None:
        actors = [((width / 2, height / 2, 0.0),)]
    tracks = []
    for j, poses in enumerate(actors):
        poses = list(poses)
        poses += [poses[-1]] * (horizon + 1 - len(poses))
        tracks.append(ActorTrack(j, (0.8, 0.8), 1.8, np.array(poses)))
    return Scenario(hm, MotionModel(**kw), horizon, tuple(robots), tuple(tracks))


@pytest.fixture
def small_scenario():
    return make_scenario()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def isclose(a, b, tol=1e-9):
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)
