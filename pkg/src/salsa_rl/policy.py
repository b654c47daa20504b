"""Latent-action policy: state-conditioned dynamics matrix acting on encoded actions.

One control step::

    z  = Enc(a_prev)            # previously executed action
    A  = 2 * tanh(N(s))         # dense h_d x h_d, entries in [-2, 2]
    z' = z + A z
    a  = clip(Dec(z'), low, high)

The executed (clipped) action is what gets re-encoded on the next step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autoencoder import ActionDataset, AutoencoderParams
from .envs import Env
from .nn import MlpParams, init_mlp, mlp_backward, mlp_forward

ENTRY_BOUND = 2.0


class PolicyFailure(ArithmeticError):
    """Non-finite value inside the policy; ``diagnostics`` holds the offending step."""

    def __init__(self, message, diagnostics=None, trajectory=None):
        super().__init__(message)
        self.diagnostics = diagnostics
        self.trajectory = trajectory


@dataclass
class SalsaPolicy:
    autoencoder: AutoencoderParams
    dynamics: MlpParams

    def __post_init__(self):
        if self.dynamics.n_out != self.h_d**2:
            raise ValueError(f"dynamics net emits {self.dynamics.n_out} values, need h_d^2 = {self.h_d ** 2}")
        if self.dynamics.layers[-1].activation != "tanh":
            raise ValueError("dynamics net must end in tanh")

    @property
    def h_d(self) -> int:
        return self.autoencoder.h_d

    @property
    def obs_dim(self) -> int:
        return self.dynamics.n_in

    @property
    def action_low(self) -> np.ndarray:
        return self.autoencoder.action_low

    @property
    def action_high(self) -> np.ndarray:
        return self.autoencoder.action_high

    def copy(self) -> "SalsaPolicy":
        return SalsaPolicy(self.autoencoder, self.dynamics.copy())


def init_dynamics_net(obs_dim: int, h_d: int, rng: np.random.Generator, hidden=(200, 200),
                      final_scale: float = 3e-3) -> MlpParams:
    """Dynamics network ``obs -> h_d^2`` with a small final layer so A starts near zero."""
    return init_mlp([obs_dim, *hidden, h_d * h_d], rng, final_activation="tanh", final_scale=final_scale)


def dynamics_matrix(params: MlpParams, state) -> np.ndarray:
    """``A = 2 tanh(N(state))`` reshaped row-major; batched states give ``(batch, h, h)``."""
    out = mlp_forward(params, state)[0]
    h = int(round(np.sqrt(out.shape[-1])))
    return ENTRY_BOUND * out.reshape(out.shape[:-1] + (h, h))


def latent_step(z, a) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != z.shape[-1] or a.shape[-2] != z.shape[-1]:
        raise ValueError(f"matrix {a.shape} and latent {z.shape} disagree")
    return z + np.einsum("...ij,...j->...i", a, z)


@dataclass
class StepDiagnostics:
    z_before: np.ndarray
    z_after: np.ndarray
    A: np.ndarray
    raw_action: np.ndarray


def policy_step(policy: SalsaPolicy, state, prev_action) -> tuple[np.ndarray, StepDiagnostics]:
    """Action for ``state`` given the previously executed action (zero at t=0)."""
    ae = policy.autoencoder
    z = mlp_forward(ae.encoder, np.asarray(prev_action, dtype=float))[0]
    a_mat = dynamics_matrix(policy.dynamics, state)
    z_new = z + a_mat @ z
    raw = mlp_forward(ae.decoder, z_new)[0]
    diag = StepDiagnostics(z, z_new, a_mat, raw)
    if not (np.all(np.isfinite(z_new)) and np.all(np.isfinite(raw))):
        raise PolicyFailure("non-finite latent or decoded action", diag)
    return np.clip(raw, ae.action_low, ae.action_high), diag


@dataclass
class BatchCache:
    z: np.ndarray
    a_mat: np.ndarray
    dyn_trace: object
    dec_trace: object
    raw: np.ndarray


def policy_forward_batch(policy: SalsaPolicy, states, prev_actions) -> tuple[np.ndarray, BatchCache]:
    """Raw (unclipped) decoder outputs for a batch, plus what the backward pass needs."""
    ae = policy.autoencoder
    z = mlp_forward(ae.encoder, prev_actions)[0]
    out, dyn_trace = mlp_forward(policy.dynamics, states)
    h = policy.h_d
    a_mat = ENTRY_BOUND * out.reshape(-1, h, h)
    z_new = z + np.einsum("bij,bj->bi", a_mat, z)
    raw, dec_trace = mlp_forward(ae.decoder, z_new)
    return raw, BatchCache(z, a_mat, dyn_trace, dec_trace, raw)


def policy_backward_batch(policy: SalsaPolicy, cache: BatchCache, grad_raw, grad_a=None) -> list[np.ndarray]:
    """Gradient of ``sum(grad_raw * raw) + sum(grad_a * A)`` w.r.t. the dynamics-net parameters only.

    Path: decoder Jacobian (frozen), then ``dz'/dA = z^T``, then the 2*tanh head
    and the dynamics network. Encoder and decoder weights receive nothing.
    ``grad_a`` (optional, shape ``(batch, h, h)``) is a direct gradient on the matrices.
    """
    _, g_z_new = mlp_backward(policy.autoencoder.decoder, cache.dec_trace, grad_raw)
    g_a = g_z_new[:, :, None] * cache.z[:, None, :]
    if grad_a is not None:
        g_a = g_a + grad_a
    g_out = ENTRY_BOUND * g_a.reshape(len(g_a), -1)
    grads, _ = mlp_backward(policy.dynamics, cache.dyn_trace, g_out)
    return grads


def clip_gradient(raw, grad, low, high) -> np.ndarray:
    """Gradient through ``clip`` that is blocked outside the box unless it points back inside.

    ``grad`` is a descent direction on the loss, i.e. the update is ``raw - lr * grad``.
    """
    above = raw > high
    below = raw < low
    blocked = (above & (grad < 0)) | (below & (grad > 0))
    return np.where(blocked, 0.0, grad)


# ---------------------------------------------------------------------------
# action masks and rollouts


@dataclass
class ActionMask:
    """Half-open ``[start, end)`` step intervals during which the executed action is zero."""

    intervals: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        ivs = sorted((int(a), int(b)) for a, b in self.intervals)
        for a, b in ivs:
            if a < 0 or b <= a:
                raise ValueError(f"bad mask interval [{a}, {b})")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if a1 < b0:
                raise ValueError("mask intervals overlap")
        self.intervals = ivs

    @classmethod
    def parse(cls, text: str) -> "ActionMask":
        """Parse ``"0:30,150:200"``."""
        text = (text or "").strip()
        if not text:
            return cls([])
        intervals = []
        for part in text.split(","):
            try:
                a, b = part.split(":")
                intervals.append((int(a), int(b)))
            except ValueError:
                raise ValueError(f"cannot parse mask interval {part!r}; expected start:end") from None
        return cls(intervals)

    def check_horizon(self, horizon: int):
        for a, b in self.intervals:
            if b > horizon:
                raise ValueError(f"mask interval [{a}, {b}) exceeds horizon {horizon}")

    def __contains__(self, t: int) -> bool:
        return any(a <= t < b for a, b in self.intervals)

    def __str__(self):
        return ",".join(f"{a}:{b}" for a, b in self.intervals)


@dataclass
class Trajectory:
    """Per-step record of a rollout; row ``t`` holds the observation the action was chosen on."""

    env_id: str
    seed: int | None
    initial_state: np.ndarray
    states: np.ndarray  # internal env state at t
    observations: np.ndarray
    prev_actions: np.ndarray
    actions: np.ndarray  # executed
    raw_actions: np.ndarray
    z_before: np.ndarray
    z_after: np.ndarray
    A: np.ndarray
    rewards: np.ndarray
    terminated: np.ndarray
    truncated: np.ndarray
    masked: np.ndarray
    final_state: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def total_reward(self) -> float:
        return float(np.sum(self.rewards))


class _Recorder:
    def __init__(self):
        self.rows = {k: [] for k in ("states", "observations", "prev_actions", "actions", "raw_actions",
                                     "z_before", "z_after", "A", "rewards", "terminated", "truncated", "masked")}

    def add(self, **kw):
        for k, v in kw.items():
            self.rows[k].append(v)

    def build(self, env_id, seed, initial_state, final_state, h_d, obs_dim, act_dim, state_dim):
        shapes = {"states": (state_dim,), "observations": (obs_dim,), "prev_actions": (act_dim,),
                  "actions": (act_dim,), "raw_actions": (act_dim,), "z_before": (h_d,), "z_after": (h_d,),
                  "A": (h_d, h_d), "rewards": (), "terminated": (), "truncated": (), "masked": ()}
        arrays = {}
        for k, v in self.rows.items():
            dtype = bool if k in ("terminated", "truncated", "masked") else float
            arrays[k] = np.array(v, dtype=dtype).reshape((len(v),) + shapes[k])
        return Trajectory(env_id, seed, np.array(initial_state, dtype=float), final_state=final_state, **arrays)


def rollout(env: Env, policy: SalsaPolicy, horizon: int | None = None, mask: ActionMask | None = None,
            seed: int | None = None, initial_state=None, noise_std: float = 0.0,
            rng: np.random.Generator | None = None) -> Trajectory:
    """Run the closed loop for up to ``horizon`` steps, stopping early on termination.

    Masked steps still evaluate the policy (so A_t is recorded from the observed
    state) but execute a zero action. ``noise_std`` adds Gaussian noise to the
    executed action before clipping.
    """
    horizon = env.max_episode_steps if horizon is None else int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    mask = mask or ActionMask()
    mask.check_horizon(horizon)
    obs = env.reset(seed=seed, state=initial_state)
    start = env.state.copy()
    rec = _Recorder()
    prev = np.zeros(env.action_dim)
    for t in range(horizon):
        state = env.state.copy()
        try:
            action, diag = policy_step(policy, obs, prev)
        except PolicyFailure as exc:
            exc.trajectory = rec.build(env.env_id, seed, start, state, policy.h_d, env.obs_dim,
                                       env.action_dim, len(state))
            raise
        masked = t in mask
        if masked:
            action = np.zeros(env.action_dim)
        elif noise_std > 0.0:
            action = np.clip(action + noise_std * rng.standard_normal(env.action_dim),
                             env.action_low, env.action_high)
        result = env.step(action)
        truncated = result.truncated or t == horizon - 1
        rec.add(states=state, observations=obs, prev_actions=prev, actions=action, raw_actions=diag.raw_action,
                z_before=diag.z_before, z_after=diag.z_after, A=diag.A, rewards=result.reward,
                terminated=result.terminated, truncated=truncated and not result.terminated, masked=masked)
        prev = action
        obs = result.next_observation
        if result.terminated or result.truncated:
            break
    return rec.build(env.env_id, seed, start, env.state.copy(), policy.h_d, env.obs_dim, env.action_dim,
                     len(start))


def replay_actions(env: Env, initial_state, actions) -> np.ndarray:
    """Internal states visited when executing ``actions`` from ``initial_state``."""
    env.reset(state=initial_state)
    states = []
    for a in actions:
        states.append(env.state.copy())
        env.step(a)
    return np.array(states)


SELECTION_SEED0 = 10_000  # reset seeds used for model selection during training
HELDOUT_SEED0 = 50_000  # reset seeds for reported scores, disjoint from the selection seeds


def evaluate(env: Env, policy: SalsaPolicy, episodes: int, seed0: int = HELDOUT_SEED0) -> np.ndarray:
    """Greedy episode returns on seeds ``seed0, seed0 + 1, ...``."""
    return np.array([rollout(env, policy, seed=seed0 + k).total_reward for k in range(episodes)])


def collect_agent_actions(env: Env, policy: SalsaPolicy, n: int, seed0: int = 0) -> ActionDataset:
    """Executed actions of greedy episodes, for refitting an autoencoder on on-policy data."""
    if n < 1:
        raise ValueError("need at least one action")
    actions, k = [], 0
    while len(actions) < n:
        actions.extend(rollout(env, policy, seed=seed0 + k).actions)
        k += 1
    return ActionDataset(np.array(actions[:n]), "pretrained-agent", env.action_low, env.action_high)
