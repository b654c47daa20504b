"""Latent linear-action reinforcement learning with post-hoc stability analysis.

A pretrained action autoencoder maps actions to a latent vector ``z``; a
state-conditioned matrix ``A(s)`` evolves it as ``z' = z + A(s) z`` and the
decoded result is the next action. The ``stability`` subpackage inspects the
recorded matrices (spectral radius, Kreiss constant, Floquet multipliers).
"""

from .action_grid import ActionGrid, action_grid
from .autoencoder import AutoencoderParams, train_autoencoder, uniform_dataset
from .envs import Env, EnvConfig, default_config, make_env, modified_pendulum_config
from .policy import ActionMask, SalsaPolicy, Trajectory, evaluate, policy_step, rollout
from .trainer import TrainConfig, default_train_config, train

__version__ = "0.1.0"

__all__ = [
    "ActionGrid", "action_grid", "AutoencoderParams", "train_autoencoder", "uniform_dataset",
    "Env", "EnvConfig", "default_config", "make_env", "modified_pendulum_config",
    "ActionMask", "SalsaPolicy", "Trajectory", "evaluate", "policy_step", "rollout",
    "TrainConfig", "default_train_config", "train",
]
