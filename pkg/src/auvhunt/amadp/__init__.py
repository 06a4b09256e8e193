"""Diffusion-based offline multi-agent policy."""

from .bundle import PolicyBundle
from .execute import ExecuteSettings, evaluate, execute_episode
from .model import CondBatch, InverseDynamics, ModelConfig, NoisePredictor, sinusoidal_embedding
from .sampling import guided_noise, p_sample_loop
from .schedule import DiffusionSchedule, make_schedule, q_sample
from .train import TrainConfig, TrainResult, ddpm_loss, inverse_dynamics_loss, train

__all__ = [
    "DiffusionSchedule",
    "make_schedule",
    "q_sample",
    "ModelConfig",
    "CondBatch",
    "NoisePredictor",
    "InverseDynamics",
    "sinusoidal_embedding",
    "guided_noise",
    "p_sample_loop",
    "TrainConfig",
    "TrainResult",
    "ddpm_loss",
    "inverse_dynamics_loss",
    "train",
    "PolicyBundle",
    "ExecuteSettings",
    "evaluate",
    "execute_episode",
]
