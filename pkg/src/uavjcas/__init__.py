"""Seedable multi-UAV joint sensing/communication mission simulator."""

from .energy import EnergyParams
from .env import EnvConfig, RewardWeights, Transition, UavJcasEnv, decode_action, obs_dim
from .errors import ConfigError, DomainError, ProtocolError, TrainingError
from .phy import JcasParams
from .world import Direction, GridSpec

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "Direction", "DomainError", "EnergyParams", "EnvConfig", "GridSpec",
    "JcasParams", "ProtocolError", "RewardWeights", "TrainingError", "Transition", "UavJcasEnv",
    "decode_action", "obs_dim",
]
