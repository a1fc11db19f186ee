"""From-scratch PPO for continuous actions: MLP policy/value, GAE, clipped surrogate."""

from .algorithm import Adam, LossStats, TrainingDivergedError, loss_and_grad, ppo_update
from .buffer import RolloutBuffer, gae_advantages
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import PpoConfig
from .networks import AgentParams, MlpParams, forward_policy, forward_value, init_agent
from .trainer import TrainResult, train

__all__ = [
    "Adam",
    "AgentParams",
    "CheckpointError",
    "LossStats",
    "MlpParams",
    "PpoConfig",
    "RolloutBuffer",
    "TrainResult",
    "TrainingDivergedError",
    "forward_policy",
    "forward_value",
    "gae_advantages",
    "init_agent",
    "load_checkpoint",
    "loss_and_grad",
    "ppo_update",
    "save_checkpoint",
    "train",
]
