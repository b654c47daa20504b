"""
Latent actions on the pendulum
==============================

A tiny tour of the pieces that sit under a trained policy: the pendulum
environment, the action autoencoder, and a single latent update
z' = z + A(s) z.

Runs in a few seconds; the autoencoder here is trained for only 20 epochs.
"""

import numpy as np

from salsa_rl.autoencoder import decode, encode, train_autoencoder, uniform_dataset
from salsa_rl.envs import make_env
from salsa_rl.policy import SalsaPolicy, init_dynamics_net, policy_step

# The pendulum starts from a seeded random state; observations are (cos, sin, theta_dot).
env = make_env("pendulum")
obs = env.reset(seed=1)
print("first observation", np.round(obs, 3))

# Zero torque for a second: the pendulum just falls.
for _ in range(20):
    step = env.step(np.zeros(1))
print("after 1 s without torque", np.round(step.next_observation, 3), "reward", round(step.reward, 3))

# %%
# The autoencoder maps a torque in [-2, 2] to a 3-dimensional latent vector and back.
data = uniform_dataset(env.action_low, env.action_high, n=4000, seed=0)
ae = train_autoencoder(data, h_d=3, epochs=20, seed=0)
print("held-out reconstruction MSE after 20 epochs: %.2e" % ae.heldout_mse)

torques = np.array([[-1.5], [0.0], [0.7]])
z = encode(ae, torques)
print("latent codes\n", np.round(z, 3))
print("round trip", np.round(decode(ae, z).ravel(), 4))

# %%
# A policy couples the frozen autoencoder with a state-conditioned dynamics
# network. One control step encodes the previous action, applies z + A z and
# decodes.
rng = np.random.default_rng(0)
policy = SalsaPolicy(ae, init_dynamics_net(env.obs_dim, 3, rng, hidden=(32, 32), final_scale=0.5))
action, diag = policy_step(policy, obs, prev_action=np.array([0.5]))
print("A(s) =\n", np.round(diag.A, 3))
print("previous action 0.5 becomes", np.round(action, 4))
