"""Variational-quantum-circuit Q-learning for joint highway driving and
RF/THz cell selection, with a classical deep-Q baseline over the identical
environment."""

__version__ = "0.1.0"

from .config import TrainConfig, load_config
from .env import EnvConfig, HighwayNetEnv, JointAction, RewardVector
from .learner import AgentConfig, NeuralQ, ReplayMemory, Transition, VqcQ, train
from .quantum import VqcParams, init_params, q_values
from .radio import BaseStation, RadioConfig
from .traffic import IdmParams, RoadConfig, VehicleState

__all__ = [
    "__version__",
    "TrainConfig", "load_config",
    "EnvConfig", "HighwayNetEnv", "JointAction", "RewardVector",
    "AgentConfig", "NeuralQ", "ReplayMemory", "Transition", "VqcQ", "train",
    "VqcParams", "init_params", "q_values",
    "BaseStation", "RadioConfig",
    "IdmParams", "RoadConfig", "VehicleState",
]
