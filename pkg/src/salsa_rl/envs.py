"""Deterministic classic-control environments (Pendulum, continuous CartPole).

Dynamics, rewards and constants follow the Gym conventions (Pendulum-v1 and
CartPole-v1 with the force scaled by a continuous action in [-1, 1]).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np


class NumericDomainError(ValueError):
    """Raised when a non-finite state or action reaches an environment."""


ENV_IDS = ("pendulum", "cartpole")


@dataclass(frozen=True)
class EnvConfig:
    env_id: str = "pendulum"
    gravity: float = 10.0
    mass: float = 1.0  # pendulum bob / cartpole pole mass
    length: float = 1.0  # pendulum rod / cartpole pole half-length
    cart_mass: float = 1.0
    force_mag: float = 10.0
    max_torque: float = 2.0
    max_speed: float = 8.0
    dt: float = 0.05
    max_episode_steps: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.env_id not in ENV_IDS:
            raise ValueError(f"unknown env id {self.env_id!r}; expected one of {ENV_IDS}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.max_episode_steps < 1:
            raise ValueError("max_episode_steps must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def default_config(env_id: str, **overrides) -> EnvConfig:
    """Gym defaults for ``env_id`` with optional keyword overrides."""
    if env_id == "pendulum":
        base = EnvConfig(env_id="pendulum")
    elif env_id == "cartpole":
        base = EnvConfig(
            env_id="cartpole", gravity=9.8, mass=0.1, length=0.5, cart_mass=1.0,
            force_mag=10.0, dt=0.02, max_episode_steps=1000,
        )
    else:
        raise ValueError(f"unknown env id {env_id!r}; expected one of {ENV_IDS}")
    return replace(base, **overrides) if overrides else base


def modified_pendulum_config(**overrides) -> EnvConfig:
    """Heavier pendulum under stronger gravity (g=15, m=1.1)."""
    return default_config("pendulum", gravity=15.0, mass=1.1, **overrides)


def _coerce(name: str, raw: str):
    kinds = {f.name: f.type for f in fields(EnvConfig)}
    if name not in kinds:
        raise KeyError(f"unknown environment key {name!r}")
    kind = kinds[name]
    if kind in ("int", int):
        return int(raw)
    if kind in ("float", float):
        return float(raw)
    return raw.strip()


def parse_key_values(lines) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment, an ``env.`` prefix is optional."""
    out = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.removeprefix("env.")] = value
    return out


def load_env_config(path=None, env_id: str | None = None, overrides: dict | None = None) -> EnvConfig:
    """Merge defaults, an optional key=value file and overrides (later wins)."""
    values = {}
    if path is not None:
        values.update(parse_key_values(Path(path).read_text().splitlines()))
    if overrides:
        values.update({k.removeprefix("env."): v for k, v in overrides.items()})
    env_id = env_id or values.get("env_id", "pendulum")
    values.pop("env_id", None)
    typed = {k: _coerce(k, str(v)) for k, v in values.items()}
    return default_config(env_id, **typed)


def dump_env_config(config: EnvConfig) -> str:
    return "".join(f"{k}={v}\n" for k, v in config.to_dict().items())


@dataclass
class StepResult:
    next_observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    next_state: np.ndarray = field(repr=False, default=None)


def _check_finite(state, action):
    if not (np.all(np.isfinite(state)) and np.all(np.isfinite(action))):
        raise NumericDomainError(f"non-finite input: state={state!r}, action={action!r}")


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def pendulum_observation(state) -> np.ndarray:
    theta, theta_dot = state
    return np.array([math.cos(theta), math.sin(theta), theta_dot])


def pendulum_step(state, action, config: EnvConfig) -> StepResult:
    """One semi-implicit Euler step of the Gym pendulum (theta = 0 is upright)."""
    state = np.asarray(state, dtype=float)
    action = np.asarray(action, dtype=float).reshape(-1)
    _check_finite(state, action)
    theta, theta_dot = state
    g, m, l, dt = config.gravity, config.mass, config.length, config.dt
    u = min(max(float(action[0]), -config.max_torque), config.max_torque)
    th = wrap_angle(theta)
    cost = th**2 + 0.1 * theta_dot**2 + 0.001 * u**2
    new_theta_dot = theta_dot + (3.0 * g / (2.0 * l) * math.sin(theta) + 3.0 / (m * l**2) * u) * dt
    new_theta_dot = min(max(new_theta_dot, -config.max_speed), config.max_speed)
    new_theta = theta + new_theta_dot * dt
    nxt = np.array([new_theta, new_theta_dot])
    return StepResult(pendulum_observation(nxt), -cost, False, False, nxt)


CARTPOLE_X_LIMIT = 2.4
CARTPOLE_ANGLE_LIMIT = 12 * 2 * math.pi / 360


def cartpole_step(state, action, config: EnvConfig) -> StepResult:
    """One explicit Euler step of the cart-pole with force ``action * force_mag``."""
    state = np.asarray(state, dtype=float)
    action = np.asarray(action, dtype=float).reshape(-1)
    _check_finite(state, action)
    x, x_dot, phi, phi_dot = state
    a = min(max(float(action[0]), -1.0), 1.0)
    force = a * config.force_mag
    total_mass = config.cart_mass + config.mass
    polemass_length = config.mass * config.length
    cos_p, sin_p = math.cos(phi), math.sin(phi)
    temp = (force + polemass_length * phi_dot**2 * sin_p) / total_mass
    phi_acc = (config.gravity * sin_p - cos_p * temp) / (
        config.length * (4.0 / 3.0 - config.mass * cos_p**2 / total_mass)
    )
    x_acc = temp - polemass_length * phi_acc * cos_p / total_mass
    dt = config.dt
    nxt = np.array([
        x + dt * x_dot,
        x_dot + dt * x_acc,
        phi + dt * phi_dot,
        phi_dot + dt * phi_acc,
    ])
    terminated = bool(
        nxt[0] < -CARTPOLE_X_LIMIT or nxt[0] > CARTPOLE_X_LIMIT
        or nxt[2] < -CARTPOLE_ANGLE_LIMIT or nxt[2] > CARTPOLE_ANGLE_LIMIT
    )
    return StepResult(nxt.copy(), 1.0, terminated, False, nxt)


def initial_state(config: EnvConfig, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if config.env_id == "pendulum":
        return np.array([rng.uniform(-math.pi, math.pi), rng.uniform(-1.0, 1.0)])
    return rng.uniform(-0.05, 0.05, size=4)


def observe(config: EnvConfig, state) -> np.ndarray:
    if config.env_id == "pendulum":
        return pendulum_observation(state)
    return np.array(state, dtype=float)


def reset(config: EnvConfig, seed: int) -> np.ndarray:
    """Initial observation for ``seed``; identical seeds give identical observations."""
    return observe(config, initial_state(config, seed))


class Env:
    """Stateful episode wrapper around the pure step functions."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.env_id = config.env_id
        if config.env_id == "pendulum":
            self.obs_dim, self.action_dim = 3, 1
            self.action_low = np.array([-config.max_torque])
            self.action_high = np.array([config.max_torque])
            self._step_fn = pendulum_step
        else:
            self.obs_dim, self.action_dim = 4, 1
            self.action_low = np.array([-1.0])
            self.action_high = np.array([1.0])
            self._step_fn = cartpole_step
        self.state = None
        self.t = 0

    @property
    def max_episode_steps(self) -> int:
        return self.config.max_episode_steps

    def reset(self, seed: int | None = None, state=None) -> np.ndarray:
        """Start an episode from ``state`` if given, else from the seeded distribution."""
        if state is None:
            state = initial_state(self.config, self.config.seed if seed is None else seed)
        self.state = np.array(state, dtype=float)
        _check_finite(self.state, np.zeros(1))
        self.t = 0
        return observe(self.config, self.state)

    def observation(self) -> np.ndarray:
        return observe(self.config, self.state)

    def step(self, action) -> StepResult:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        result = self._step_fn(self.state, action, self.config)
        self.state = result.next_state
        self.t += 1
        if not result.terminated and self.t >= self.config.max_episode_steps:
            result.truncated = True
        return result


def make_env(env_id_or_config, **overrides) -> Env:
    if isinstance(env_id_or_config, EnvConfig):
        cfg = replace(env_id_or_config, **overrides) if overrides else env_id_or_config
    else:
        cfg = default_config(env_id_or_config, **overrides)
    return Env(cfg)


def pendulum_energy(state, config: EnvConfig) -> float:
    """Conserved quantity of the unforced continuous pendulum (per unit inertia)."""
    theta, theta_dot = state
    return 0.5 * theta_dot**2 + 3.0 * config.gravity / (2.0 * config.length) * math.cos(theta)
