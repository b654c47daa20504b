"""Deterministic actor-critic training of the dynamics network (DDPG style).

Only the dynamics network is optimised by the actor step; the encoder and
decoder stay frozen and the critic is a plain ``Q(s, a)`` regressor.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .autoencoder import AutoencoderParams
from .envs import Env
from .nn import AdamState, MlpParams, adam_step, init_mlp, mlp_backward, mlp_forward, soft_update
from .policy import SELECTION_SEED0, SalsaPolicy, clip_gradient, evaluate, init_dynamics_net, policy_forward_batch, \
    policy_backward_batch, policy_step

log = logging.getLogger(__name__)

__all__ = [
    "Transition", "ReplayBuffer", "TrainConfig", "TrainResult", "critic_update", "actor_update",
    "soft_update", "train", "init_critic", "default_train_config",
]


class TrainingError(RuntimeError):
    pass


class FrozenParameterError(AssertionError):
    """A network that must not change during an update was modified."""


@dataclass
class Transition:
    state: np.ndarray
    prev_action: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions stored column-wise."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, obs_dim))
        self.prev_actions = np.zeros((capacity, action_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self.inserted = 0

    def __len__(self) -> int:
        return min(self.inserted, self.capacity)

    def add(self, tr: Transition):
        i = self.inserted % self.capacity
        self.states[i] = tr.state
        self.prev_actions[i] = tr.prev_action
        self.actions[i] = tr.action
        self.rewards[i] = tr.reward
        self.next_states[i] = tr.next_state
        self.dones[i] = float(tr.done)
        self.inserted += 1

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        """Uniform batch, no index repeated within the batch."""
        n = len(self)
        if n == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.choice(n, size=min(batch_size, n), replace=False)
        return {
            "states": self.states[idx], "prev_actions": self.prev_actions[idx],
            "actions": self.actions[idx], "rewards": self.rewards[idx],
            "next_states": self.next_states[idx], "dones": self.dones[idx],
        }


@dataclass
class TrainConfig:
    """Training hyperparameters. None of these come from a published recipe; they are declared defaults."""

    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 128
    buffer_capacity: int = 200_000
    noise_std: float = 0.1  # fraction of the action range
    noise_final_fraction: float = 0.1  # noise decays linearly to noise_std * this
    total_steps: int = 30_000
    warmup_steps: int = 1_000
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    lr_final_fraction: float = 1.0
    a_penalty: float = 0.0  # weight of mean ||A||_F^2 added to the actor loss
    hidden: tuple = (200, 200)
    eval_every: int = 2_000
    eval_episodes: int = 5
    patience: int = 1_000  # consecutive non-improving evaluations before aborting
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        self.hidden = tuple(int(h) for h in self.hidden)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: (tuple(v) if k == "hidden" else v) for k, v in d.items() if k in names})


def default_train_config(env_id: str, **overrides) -> TrainConfig:
    base = {
        # a small A penalty, and no exploration noise at the end so late updates see clean actions
        "pendulum": dict(total_steps=40_000, lr_final_fraction=0.1, a_penalty=1.0, noise_final_fraction=0.0,
                         eval_episodes=10),
        # the longer discount horizon lets the critic see the track edge coming
        "cartpole": dict(total_steps=100_000, actor_lr=1e-4, gamma=0.995, eval_every=5_000),
    }[env_id]
    base.update(overrides)
    return TrainConfig(**base)


def init_critic(obs_dim: int, action_dim: int, rng: np.random.Generator, hidden=(200, 200)) -> MlpParams:
    return init_mlp([obs_dim + action_dim, *hidden, 1], rng, final_scale=3e-3)


def _q(critic: MlpParams, states, actions):
    return mlp_forward(critic, np.concatenate([states, actions], axis=1))


def critic_update(critic: MlpParams, critic_opt: AdamState, target_critic: MlpParams,
                  target_policy: SalsaPolicy, batch: dict, gamma: float) -> float:
    """One Adam step on ``mean((Q(s,a) - y)^2)``, ``y = r + gamma (1 - done) Q'(s', pi'(s', a))``.

    ``done`` marks true terminations only; time-limit truncations bootstrap.
    """
    ae = target_policy.autoencoder
    raw_next, _ = policy_forward_batch(target_policy, batch["next_states"], batch["actions"])
    next_actions = np.clip(raw_next, ae.action_low, ae.action_high)
    q_next = _q(target_critic, batch["next_states"], next_actions)[0][:, 0]
    y = batch["rewards"] + gamma * (1.0 - batch["dones"]) * q_next
    q, trace = _q(critic, batch["states"], batch["actions"])
    diff = q[:, 0] - y
    loss = float(np.mean(diff**2))
    if not math.isfinite(loss):
        raise TrainingError(f"critic loss became {loss}; max |y| = {np.max(np.abs(y))}")
    grads, _ = mlp_backward(critic, trace, (2.0 / len(diff)) * diff[:, None])
    adam_step(critic, grads, critic_opt)
    return loss


def actor_gradient(policy: SalsaPolicy, critic: MlpParams, batch: dict, a_penalty: float = 0.0):
    """Gradient of ``-mean Q(s, clip(pi(s, a_prev))) + a_penalty * mean ||A||_F^2`` w.r.t. the dynamics net.

    Also returns ``mean Q`` (the unpenalised objective).
    """
    ae = policy.autoencoder
    raw, cache = policy_forward_batch(policy, batch["states"], batch["prev_actions"])
    actions = np.clip(raw, ae.action_low, ae.action_high)
    q, trace = _q(critic, batch["states"], actions)
    n = len(q)
    _, g_in = mlp_backward(critic, trace, np.full((n, 1), -1.0 / n), param_grads=False)
    g_action = g_in[:, -ae.action_dim:]
    g_raw = clip_gradient(raw, g_action, ae.action_low, ae.action_high)
    g_a = (2.0 * a_penalty / n) * cache.a_mat if a_penalty else None
    grads = policy_backward_batch(policy, cache, g_raw, g_a)
    return grads, float(np.mean(q))


def actor_update(policy: SalsaPolicy, actor_opt: AdamState, critic: MlpParams, batch: dict,
                 check_frozen: bool = False, a_penalty: float = 0.0) -> float:
    """Ascend ``E[Q(s, pi(s, a_prev))]`` by one Adam step on the dynamics network.

    Returns the objective value before the step.
    """
    if check_frozen:
        before = (policy.autoencoder.digest(), critic.digest())
    grads, objective = actor_gradient(policy, critic, batch, a_penalty)
    adam_step(policy.dynamics, grads, actor_opt)
    if check_frozen and before != (policy.autoencoder.digest(), critic.digest()):
        raise FrozenParameterError("actor update modified the autoencoder or critic")
    return objective


@dataclass
class TrainResult:
    policy: SalsaPolicy
    critic: MlpParams
    config: TrainConfig
    curve: list[dict] = field(default_factory=list)  # episode, return, eval_return
    best_eval: float = -math.inf
    aborted: bool = False
    steps: int = 0


def train(env: Env, autoencoder: AutoencoderParams, config: TrainConfig, h_d: int | None = None,
          checkpoint=None, checkpoint_every: int = 0) -> TrainResult:
    """Train a latent-action policy on ``env``; returns the best greedy-evaluated networks.

    ``checkpoint(result, episode)`` is called every ``checkpoint_every`` episodes when given.
    """
    if not autoencoder.frozen:
        raise TrainingError("autoencoder must be pretrained (frozen) before policy training")
    if h_d is not None and h_d != autoencoder.h_d:
        raise TrainingError(f"requested h_d={h_d} but autoencoder has h_d={autoencoder.h_d}")
    ae_digest = autoencoder.digest()
    rng = np.random.default_rng(config.seed)
    obs_dim, act_dim = env.obs_dim, env.action_dim
    low, high = env.action_low, env.action_high
    policy = SalsaPolicy(autoencoder, init_dynamics_net(obs_dim, autoencoder.h_d, rng, config.hidden))
    critic = init_critic(obs_dim, act_dim, rng, config.hidden)
    target_policy = policy.copy()
    target_critic = critic.copy()
    actor_opt = AdamState(lr=config.actor_lr)
    critic_opt = AdamState(lr=config.critic_lr)
    buffer = ReplayBuffer(config.buffer_capacity, obs_dim, act_dim)
    result = TrainResult(policy.copy(), critic.copy(), config)

    episode_seed = config.seed * 100_000
    obs = env.reset(seed=episode_seed)
    prev = np.zeros(act_dim)
    ep_return, episode = 0.0, 0
    eval_due = False
    stale_evals = 0
    action_range = high - low
    for step in range(config.total_steps):
        frac = step / max(config.total_steps - 1, 1)
        sigma = config.noise_std * action_range * (1.0 - (1.0 - config.noise_final_fraction) * frac)
        if step < config.warmup_steps:
            action = rng.uniform(low, high)
        else:
            action, _ = policy_step(policy, obs, prev)
            action = np.clip(action + sigma * rng.standard_normal(act_dim), low, high)
        res = env.step(action)
        buffer.add(Transition(obs, prev, action, res.reward, res.next_observation, res.terminated))
        ep_return += res.reward
        prev, obs = action, res.next_observation

        if step >= config.warmup_steps:
            lr_scale = config.lr_final_fraction ** ((step - config.warmup_steps)
                                                    / max(config.total_steps - config.warmup_steps, 1))
            actor_opt.lr = config.actor_lr * lr_scale
            critic_opt.lr = config.critic_lr * lr_scale
            batch = buffer.sample(config.batch_size, rng)
            critic_update(critic, critic_opt, target_critic, target_policy, batch, config.gamma)
            actor_update(policy, actor_opt, critic, batch, a_penalty=config.a_penalty)
            soft_update(target_critic, critic, config.tau)
            soft_update(target_policy.dynamics, policy.dynamics, config.tau)
        if (step + 1) % config.eval_every == 0:
            eval_due = True

        if res.terminated or res.truncated:
            row = {"episode": episode, "return": ep_return, "eval_return": None}
            if eval_due and step >= config.warmup_steps:
                eval_due = False
                score = float(np.mean(evaluate(env, policy, config.eval_episodes, seed0=SELECTION_SEED0)))
                row["eval_return"] = score
                if score > result.best_eval:
                    result.best_eval = score
                    result.policy, result.critic = policy.copy(), critic.copy()
                    stale_evals = 0
                else:
                    stale_evals += 1
                log.info("step %d episode %d return %.1f eval %.1f (best %.1f)",
                         step + 1, episode, ep_return, score, result.best_eval)
            result.curve.append(row)
            episode += 1
            if checkpoint is not None and checkpoint_every and episode % checkpoint_every == 0:
                checkpoint(result, episode)
            if stale_evals >= config.patience:
                log.warning("no eval improvement for %d evaluations; stopping", stale_evals)
                result.aborted = True
                break
            obs = env.reset(seed=episode_seed + episode)
            prev = np.zeros(act_dim)
            ep_return = 0.0
    result.steps = step + 1
    if autoencoder.digest() != ae_digest:
        raise FrozenParameterError("autoencoder weights changed during policy training")
    if result.best_eval == -math.inf:
        result.policy, result.critic = policy.copy(), critic.copy()
    return result
