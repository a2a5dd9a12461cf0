"""Environments: pendulum swing-up plus two analytically tractable test MDPs.

All dynamics are deterministic given the action; the only randomness is in the
initial state. Every environment exposes a vectorized ``step_batch`` kernel and
the scalar ``step``/``reset`` delegate to it with batch size 1, so scalar and
batched rollouts follow bit-identical arithmetic.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class EnvState:
    """A point of the state space, stored as a 1-d float64 coordinate vector."""

    coordinates: np.ndarray

    def __post_init__(self) -> None:
        coords = np.asarray(self.coordinates, dtype=np.float64)
        if coords.ndim != 1:
            raise ValueError("state coordinates must be a 1-d vector")
        object.__setattr__(self, "coordinates", coords)


@dataclass(frozen=True)
class EnvSpec:
    """Static facts about an MDP: dimensions, reward bound and discount."""

    state_dim: int
    action_dim: int
    reward_bound: float
    gamma: float

    def __post_init__(self) -> None:
        if self.state_dim < 1 or self.action_dim < 1:
            raise ValueError("state_dim and action_dim must be positive")
        if not (math.isfinite(self.reward_bound) and self.reward_bound > 0.0):
            raise ValueError("reward_bound must be finite and positive")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class PendulumParams:
    """Physical constants of the swing-up problem (standard benchmark values)."""

    gravity: float = 10.0
    mass: float = 1.0
    length: float = 1.0
    dt: float = 0.05
    max_speed: float = 8.0
    max_torque: float = 2.0

    def reward_bound(self) -> float:
        """Largest attainable |reward|: hit at angle ±pi, top speed, max torque."""
        return (
            math.pi**2
            + 0.1 * self.max_speed**2
            + 0.001 * self.max_torque**2
        )


def wrap_angle(angle):
    """Map an angle (scalar or array) into [-pi, pi].

    Uses ``x - 2*pi*round(x / 2*pi)`` with round-half-even, which keeps both
    endpoints: wrap(pi) == pi and wrap(-pi) == -pi, and is idempotent on the
    whole target interval.
    """
    angle = np.asarray(angle, dtype=np.float64)
    wrapped = angle - TWO_PI * np.round(angle / TWO_PI)
    if wrapped.ndim == 0:
        return float(wrapped)
    return wrapped


def pendulum_reward(angle, ang_vel, torque, params: PendulumParams | None = None):
    """Per-step cost -(angle^2 + 0.1*ang_vel^2 + 0.001*torque^2).

    Inputs must already satisfy the state/torque ranges; violations raise
    rather than silently producing out-of-model rewards.
    """
    if params is None:
        params = PendulumParams()
    angle = np.asarray(angle, dtype=np.float64)
    ang_vel = np.asarray(ang_vel, dtype=np.float64)
    torque = np.asarray(torque, dtype=np.float64)
    if not (
        np.all(np.isfinite(angle))
        and np.all(np.isfinite(ang_vel))
        and np.all(np.isfinite(torque))
    ):
        raise ValueError("pendulum_reward: non-finite input")
    if np.any(np.abs(angle) > math.pi):
        raise ValueError("pendulum_reward: angle outside [-pi, pi]")
    if np.any(np.abs(ang_vel) > params.max_speed):
        raise ValueError("pendulum_reward: angular velocity outside bounds")
    if np.any(np.abs(torque) > params.max_torque):
        raise ValueError("pendulum_reward: torque outside bounds")
    reward = -(angle**2 + 0.1 * ang_vel**2 + 0.001 * torque**2)
    if reward.ndim == 0:
        return float(reward)
    return reward


def _pendulum_step_arrays(
    coords: np.ndarray, torque: np.ndarray, params: PendulumParams
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized semi-implicit Euler step; reward is paid on the pre-step state."""
    angle = coords[:, 0]
    ang_vel = coords[:, 1]
    reward = pendulum_reward(angle, ang_vel, torque, params)
    reward = np.atleast_1d(np.asarray(reward, dtype=np.float64))

    accel = (3.0 * params.gravity / (2.0 * params.length)) * np.sin(angle)
    accel = accel + (3.0 / (params.mass * params.length**2)) * torque
    new_vel = np.clip(
        ang_vel + accel * params.dt, -params.max_speed, params.max_speed
    )
    new_angle = wrap_angle(angle + new_vel * params.dt)
    return np.column_stack([new_angle, new_vel]), reward


def pendulum_step(
    state: EnvState, torque: float, params: PendulumParams | None = None
) -> tuple[EnvState, float]:
    """Advance the pendulum one dt under an already-clipped torque."""
    if params is None:
        params = PendulumParams()
    torque_arr = np.asarray([torque], dtype=np.float64)
    if not np.isfinite(torque_arr[0]):
        raise ValueError("pendulum_step: non-finite torque")
    coords = state.coordinates[None, :]
    if not np.all(np.isfinite(coords)):
        raise ValueError("pendulum_step: non-finite state")
    next_coords, reward = _pendulum_step_arrays(coords, torque_arr, params)
    return EnvState(next_coords[0]), float(reward[0])


def pendulum_reset(rng: np.random.Generator, params: PendulumParams | None = None) -> EnvState:
    """Draw angle ~ U[-pi, pi] and angular velocity ~ U[-1, 1]."""
    if params is None:
        params = PendulumParams()
    angle = rng.uniform(-math.pi, math.pi, 1)
    ang_vel = rng.uniform(-1.0, 1.0, 1)
    return EnvState(np.array([angle[0], ang_vel[0]]))


class Environment(ABC):
    """Deterministic-dynamics MDP with a stochastic reset.

    Subclasses implement the batched kernels; the scalar interface is a thin
    batch-of-one wrapper so both paths share arithmetic and RNG consumption.
    """

    name: str
    spec: EnvSpec

    @abstractmethod
    def reset_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n initial states, shape (n, state_dim)."""

    @abstractmethod
    def step_batch(
        self, coords: np.ndarray, actions: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Advance n states under n raw actions; returns (next_coords, rewards)."""

    def reset(self, rng: np.random.Generator) -> EnvState:
        return EnvState(self.reset_batch(1, rng)[0])

    def step(self, state: EnvState, action: float) -> tuple[EnvState, float]:
        next_coords, rewards = self.step_batch(
            state.coordinates[None, :], np.asarray([action], dtype=np.float64)
        )
        return EnvState(next_coords[0]), float(rewards[0])

    def _check_rewards(self, rewards: np.ndarray) -> None:
        if rewards.size and float(np.max(np.abs(rewards))) > self.spec.reward_bound:
            raise AssertionError(
                f"{self.name}: emitted reward exceeds the declared bound "
                f"{self.spec.reward_bound}"
            )


class PendulumEnv(Environment):
    """Torque-limited swing-up task.

    Raw policy actions are unbounded; the environment squashes them through
    ``max_torque * tanh(a)`` before the dynamics, and the squashed torque is
    what enters the control-cost term of the reward.
    """

    name = "pendulum"

    def __init__(self, params: PendulumParams | None = None, gamma: float = 0.97):
        self.params = params if params is not None else PendulumParams()
        self.spec = EnvSpec(
            state_dim=2,
            action_dim=1,
            reward_bound=self.params.reward_bound(),
            gamma=gamma,
        )

    def reset_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        angles = rng.uniform(-math.pi, math.pi, n)
        ang_vels = rng.uniform(-1.0, 1.0, n)
        return np.column_stack([angles, ang_vels])

    def step_batch(
        self, coords: np.ndarray, actions: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        actions = np.asarray(actions, dtype=np.float64)
        if not np.all(np.isfinite(actions)):
            raise ValueError("pendulum: non-finite action")
        torque = self.params.max_torque * np.tanh(actions)
        next_coords, rewards = _pendulum_step_arrays(coords, torque, self.params)
        self._check_rewards(rewards)
        return next_coords, rewards


class GaussianBanditEnv(Environment):
    """Single-state env whose reward is a Gaussian bump exp(-(a - center)^2).

    The optimal policy mean sits at ``center``; closed-form value and gradient
    make this the main correctness fixture for the estimators.
    """

    name = "bandit"

    def __init__(self, center: float = 1.0, gamma: float = 0.9):
        self.center = float(center)
        self.spec = EnvSpec(state_dim=1, action_dim=1, reward_bound=1.0, gamma=gamma)

    def reset_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.zeros((n, 1))

    def step_batch(
        self, coords: np.ndarray, actions: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        actions = np.asarray(actions, dtype=np.float64)
        if not np.all(np.isfinite(actions)):
            raise ValueError("bandit: non-finite action")
        rewards = np.exp(-((actions - self.center) ** 2))
        self._check_rewards(rewards)
        return coords, rewards


class ConstRewardEnv(Environment):
    """Reward identically 1: random-horizon returns count transitions exactly."""

    name = "const"

    def __init__(self, gamma: float = 0.9):
        self.spec = EnvSpec(state_dim=1, action_dim=1, reward_bound=1.0, gamma=gamma)

    def reset_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.zeros((n, 1))

    def step_batch(
        self, coords: np.ndarray, actions: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        actions = np.asarray(actions, dtype=np.float64)
        if not np.all(np.isfinite(actions)):
            raise ValueError("const: non-finite action")
        rewards = np.ones(len(actions))
        self._check_rewards(rewards)
        return coords, rewards


_ENV_DEFAULT_GAMMA = {"pendulum": 0.97, "bandit": 0.9, "const": 0.9}


def make_env(name: str, gamma: float | None = None, **params) -> Environment:
    """Build a shipped environment by name ('pendulum', 'bandit', 'const')."""
    if name not in _ENV_DEFAULT_GAMMA:
        raise ValueError(f"unknown environment {name!r}")
    if gamma is None:
        gamma = _ENV_DEFAULT_GAMMA[name]
    if name == "pendulum":
        return PendulumEnv(params=PendulumParams(**params) if params else None, gamma=gamma)
    if name == "bandit":
        return GaussianBanditEnv(gamma=gamma, **params)
    if params:
        raise ValueError("const environment takes no extra parameters")
    return ConstRewardEnv(gamma=gamma)
