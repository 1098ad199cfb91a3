"""aavrelay: a multi-AAV, beamforming-assisted, AoI-sensitive data-forwarding
simulator with a from-scratch SAC-TLS trainer, baselines, structured pruning,
and a reproducible experiment harness."""

from .config import (
    ChannelParams,
    ConfigError,
    EnergyParams,
    EnvConfig,
    ExperimentConfig,
    PruneConfig,
    SacConfig,
    WorldConfig,
    load_config,
    parse_config,
    serialize_config,
)
from .env import ForwardingEnv, StepResult, dpam_assign, episode_metrics
from .toy import PointGoalEnv, optimal_return
from .world import World, Violation, apply_moves, generate_topology, world_from_json, world_to_json

__version__ = "0.1.0"

from .nn import ActorNetwork, CriticNetwork  # noqa: E402
from .sac import SacTrainer, actor_from_checkpoint  # noqa: E402

__all__ = [
    "ActorNetwork",
    "ChannelParams",
    "ConfigError",
    "CriticNetwork",
    "EnergyParams",
    "EnvConfig",
    "ExperimentConfig",
    "ForwardingEnv",
    "PointGoalEnv",
    "PruneConfig",
    "SacConfig",
    "SacTrainer",
    "StepResult",
    "Violation",
    "World",
    "WorldConfig",
    "actor_from_checkpoint",
    "apply_moves",
    "dpam_assign",
    "episode_metrics",
    "generate_topology",
    "load_config",
    "optimal_return",
    "parse_config",
    "serialize_config",
    "world_from_json",
    "world_to_json",
    "__version__",
]
