"""Deterministic multi-agent gathering simulator and benchmark suite."""

from .constellation import ConstellationSpec, generate
from .control import (
    Action,
    AnalyticalController,
    RandomController,
    StationaryController,
    analytical_action,
    smallest_sector,
)
from .engine import EnvConfig, EpisodeResult, GatheringEnv, Outcome, run_episode
from .geometry import SwarmState, bearing, bounding_radius, distance, swarm_center
from .rewards import RewardConfig, StepReward, step_rewards
from .sensing import Observation, observe, project, rasterize
from .visibility import build_graph, components, is_connected, neighbor_set

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AnalyticalController",
    "ConstellationSpec",
    "EnvConfig",
    "EpisodeResult",
    "GatheringEnv",
    "Observation",
    "Outcome",
    "RandomController",
    "RewardConfig",
    "StationaryController",
    "StepReward",
    "SwarmState",
    "analytical_action",
    "bearing",
    "bounding_radius",
    "build_graph",
    "components",
    "distance",
    "generate",
    "is_connected",
    "neighbor_set",
    "observe",
    "project",
    "rasterize",
    "run_episode",
    "smallest_sector",
    "step_rewards",
    "swarm_center",
    "__version__",
]
