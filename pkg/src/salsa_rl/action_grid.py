"""Actions assigned by a pendulum policy over the (theta, theta_dot) plane."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import pendulum_observation
from .policy import SalsaPolicy, policy_forward_batch


@dataclass
class ActionGrid:
    thetas: np.ndarray
    theta_dots: np.ndarray
    prev_action: np.ndarray
    actions: np.ndarray  # (len(thetas), len(theta_dots)) executed (clipped) action

    def to_dict(self) -> dict:
        return {
            "thetas": self.thetas.tolist(), "theta_dots": self.theta_dots.tolist(),
            "prev_action": self.prev_action.tolist(), "actions": self.actions.tolist(),
            "convention": "executed action for state (theta, theta_dot) when prev_action was executed last",
        }


def action_grid(policy: SalsaPolicy, thetas=None, theta_dots=None, prev_action=0.0,
                resolution: int = 101) -> ActionGrid:
    """Evaluate the clipped policy action on a grid (defaults: [-pi, pi] x [-8, 8]).

    Every cell uses the same ``prev_action``, since the policy output depends on
    the previously executed action as well as the state.
    """
    if policy.obs_dim != 3 or policy.autoencoder.action_dim != 1:
        raise ValueError("the action grid is defined for the pendulum (3-d observation, 1-d action)")
    thetas = np.linspace(-np.pi, np.pi, resolution) if thetas is None else np.asarray(thetas, float)
    theta_dots = np.linspace(-8.0, 8.0, resolution) if theta_dots is None else np.asarray(theta_dots, float)
    prev = np.atleast_1d(np.asarray(prev_action, dtype=float))
    th, thd = np.meshgrid(thetas, theta_dots, indexing="ij")
    obs = np.array([pendulum_observation((a, b)) for a, b in zip(th.ravel(), thd.ravel())])
    prevs = np.repeat(prev[None, :], len(obs), axis=0)
    raw, _ = policy_forward_batch(policy, obs, prevs)
    acts = np.clip(raw, policy.action_low, policy.action_high)[:, 0]
    return ActionGrid(thetas, theta_dots, prev, acts.reshape(th.shape))
