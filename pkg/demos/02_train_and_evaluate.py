"""
Training a pendulum policy
==========================

Pretrain the autoencoder, freeze it, then train the dynamics network with an
actor-critic loop. The defaults below are a quick smoke run (a few minutes);
set ``FULL = True`` for the settings used for the reported results, which take
roughly ten minutes on one core.
"""

import logging

import numpy as np

from salsa_rl.autoencoder import train_autoencoder, uniform_dataset
from salsa_rl.envs import make_env
from salsa_rl.io import ModelBundle, save_bundle
from salsa_rl.policy import evaluate
from salsa_rl.trainer import default_train_config, train

FULL = False
logging.basicConfig(level=logging.INFO, format="%(message)s")

env = make_env("pendulum")
ae = train_autoencoder(uniform_dataset(env.action_low, env.action_high, seed=0), h_d=3,
                       epochs=500 if FULL else 60, seed=0)
print("autoencoder held-out MSE %.2e" % ae.heldout_mse)

# %%
# The per-environment defaults are tuned for the full run; the smoke run just
# shortens it.
config = default_train_config("pendulum", seed=0)
if not FULL:
    config = default_train_config("pendulum", seed=0, total_steps=6_000, eval_every=1_000)
result = train(env, ae, config)

returns = evaluate(env, result.policy, episodes=10)
print("greedy return over 10 held-out episodes: %.1f +- %.1f" % (returns.mean(), returns.std()))

# %%
# Bundles are plain JSON with a content hash, so they can be diffed and reloaded bit for bit.
path = save_bundle("pendulum_demo_bundle.json", ModelBundle("pendulum", result.policy, result.critic,
                                                            env.config, config))
print("saved", path)
