"""Coordinated multi-camera view planning on 2.5D grid worlds."""

from .camera import CameraIntrinsics, CameraPose, aim_at, face_pixel_density, occlusion_test
from .coordination import (
    Conflict,
    PlanResult,
    detect_first_conflict,
    plan_cocap,
    plan_sequential,
    plan_unconstrained,
    split,
    validate,
)
from .coverage import CoverageLedger, CoverageModel, cov, covm, covp, objective
from .experiment import ExperimentConfig, MetricsRecord, run_experiment
from .scenarios import generate_bottleneck, generate_clutter, generate_corridor
from .solvers import Constraint, Trajectory, value_iteration, view_search
from .world import ActorTrack, GridVertex, HeightMap, MotionModel, Scenario, actor_faces_at, neighbors, traversable

__version__ = "0.1.0"

__all__ = [
    "ActorTrack",
    "CameraIntrinsics",
    "CameraPose",
    "Conflict",
    "Constraint",
    "CoverageLedger",
    "CoverageModel",
    "ExperimentConfig",
    "GridVertex",
    "HeightMap",
    "MetricsRecord",
    "MotionModel",
    "PlanResult",
    "Scenario",
    "Trajectory",
    "actor_faces_at",
    "aim_at",
    "cov",
    "covm",
    "covp",
    "detect_first_conflict",
    "face_pixel_density",
    "generate_bottleneck",
    "generate_clutter",
    "generate_corridor",
    "neighbors",
    "objective",
    "occlusion_test",
    "plan_cocap",
    "plan_sequential",
    "plan_unconstrained",
    "run_experiment",
    "split",
    "traversable",
    "validate",
    "value_iteration",
    "view_search",
]
