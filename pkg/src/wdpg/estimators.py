"""Unbiased gradient estimators built on a geometric random horizon.

Two estimators share the same skeleton: draw a horizon T with
P(T = t) = (1 - gamma) * gamma^t, accumulate the *undiscounted* reward of a
rollout over t = 0..T inclusive (T + 1 transitions), and scale. Because
P(T >= k) = gamma^k, that random-length sum is an unbiased estimate of the
discounted action value.

* ``wd_gradient`` starts two phantom rollouts at the same state with initial
  actions drawn from the positive and negative components of the policy
  gradient's signed decomposition, shares one horizon between them, and scales
  the return difference by weight/(1 - gamma).
* ``sf_gradient`` runs a single rollout whose initial action comes from the
  policy itself and scales the return by the score vector/(1 - gamma).

The batch variants are the actual kernels; scalar calls run them with n = 1
and consume the random stream identically, which the tests pin bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from wdpg.env import Environment, EnvState
from wdpg.policy import GaussianPolicy, rayleigh_offsets


@dataclass(frozen=True)
class RolloutResult:
    """Undiscounted reward sum of one phantom rollout plus its accounting."""

    total_reward: float
    transitions_used: int
    horizon: int


@dataclass(frozen=True)
class GradientEstimate:
    """One gradient estimate together with everything needed to recompute it.

    ``vector`` is exactly ``weight * (returns[0] - returns[1]) / (1 - gamma)``
    for the weak-derivative kind and ``weight * returns[0] / (1 - gamma)`` for
    the score-function kind; ``reconstruct_vector`` re-evaluates that product.
    """

    vector: np.ndarray
    kind: str
    horizon: int
    weight: np.ndarray
    returns: tuple[float, ...]
    gamma: float
    transitions_used: int

    def reconstruct_vector(self) -> np.ndarray:
        return _combine(self.kind, self.weight, self.returns, self.gamma)


@dataclass(frozen=True)
class BatchGradients:
    """n independent gradient estimates produced by one vectorized pass."""

    kind: str
    vectors: np.ndarray
    weights: np.ndarray
    horizons: np.ndarray
    returns: tuple[np.ndarray, ...]
    gamma: float
    transitions: np.ndarray

    def __len__(self) -> int:
        return len(self.vectors)

    def single(self, i: int) -> GradientEstimate:
        return GradientEstimate(
            vector=self.vectors[i].copy(),
            kind=self.kind,
            horizon=int(self.horizons[i]),
            weight=self.weights[i].copy(),
            returns=tuple(float(r[i]) for r in self.returns),
            gamma=self.gamma,
            transitions_used=int(self.transitions[i]),
        )


def _combine(kind: str, weight: np.ndarray, returns: tuple, gamma: float) -> np.ndarray:
    if kind == "wd":
        signal = (returns[0] - returns[1]) / (1.0 - gamma)
    elif kind == "sf":
        signal = returns[0] / (1.0 - gamma)
    else:
        raise ValueError(f"unknown estimator kind {kind!r}")
    return weight * signal


def _clone_generator(rng: np.random.Generator) -> np.random.Generator:
    clone = np.random.default_rng()
    clone.bit_generator.state = rng.bit_generator.state
    return clone


def sample_horizons(gamma: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n horizons with P(T = t) = (1 - gamma) * gamma^t via floor(ln U / ln gamma)."""
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie strictly inside (0, 1)")
    u = 1.0 - rng.random(n)
    return np.floor(np.log(u) / math.log(gamma)).astype(np.int64)


def sample_horizon(gamma: float, rng: np.random.Generator) -> int:
    return int(sample_horizons(gamma, 1, rng)[0])


def rollout_returns_batch(
    env: Environment,
    coords: np.ndarray,
    actions: np.ndarray,
    policy: GaussianPolicy,
    horizons: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Run n rollouts in lockstep and return their undiscounted reward sums.

    Rollout i pays rewards for t = 0..horizons[i] inclusive; the initial action
    is given, continuation actions are drawn from the policy one step at a time
    (one standard normal per live rollout per step, in rollout order).
    """
    coords = np.asarray(coords, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    horizons = np.asarray(horizons, dtype=np.int64)
    n = len(coords)
    if actions.shape != (n,) or horizons.shape != (n,):
        raise ValueError("coords, actions and horizons must agree in length")
    if n and int(horizons.min()) < 0:
        raise ValueError("horizons must be non-negative")

    totals = np.zeros(n)
    alive = np.arange(n)
    cur_coords = coords
    cur_actions = actions
    cur_horizons = horizons
    t = 0
    while alive.size:
        next_coords, rewards = env.step_batch(cur_coords, cur_actions)
        totals[alive] += rewards
        cont = cur_horizons > t
        alive = alive[cont]
        if alive.size:
            cur_coords = next_coords[cont]
            cur_horizons = cur_horizons[cont]
            cur_actions = policy.sample_batch(cur_coords, rng)
        t += 1
    return totals


def rollout_return(
    env: Environment,
    state: EnvState,
    action: float,
    policy: GaussianPolicy,
    horizon: int,
    rng: np.random.Generator,
) -> RolloutResult:
    """Single rollout; wraps the batch kernel at n = 1 (identical stream use)."""
    horizon = int(horizon)
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    totals = rollout_returns_batch(
        env,
        state.coordinates[None, :],
        np.asarray([action], dtype=np.float64),
        policy,
        np.asarray([horizon], dtype=np.int64),
        rng,
    )
    return RolloutResult(
        total_reward=float(totals[0]),
        transitions_used=horizon + 1,
        horizon=horizon,
    )


def wd_gradient_batch(
    env: Environment,
    policy: GaussianPolicy,
    coords: np.ndarray,
    rng: np.random.Generator,
    couple_actions: bool = False,
) -> BatchGradients:
    """n weak-derivative estimates at the given start states (rows of coords).

    Stream layout per call: n horizon uniforms, n positive offsets, n negative
    offsets, then two child generators for the phantom rollouts. The two
    rollouts of each estimate share the horizon and start state but use
    independent continuation streams unless ``couple_actions`` clones one
    child stream into both (common random numbers).
    """
    coords = np.asarray(coords, dtype=np.float64)
    n = len(coords)
    gamma = env.spec.gamma
    feats = policy.features.batch(coords)
    means = feats @ policy.theta
    weights = feats / math.sqrt(2.0 * math.pi * policy.sigma**2)

    horizons = sample_horizons(gamma, n, rng)
    a_plus = means + rayleigh_offsets(policy.sigma, n, rng)
    a_minus = means - rayleigh_offsets(policy.sigma, n, rng)
    if couple_actions:
        rng_plus = rng.spawn(1)[0]
        rng_minus = _clone_generator(rng_plus)
    else:
        rng_plus, rng_minus = rng.spawn(2)

    r_plus = rollout_returns_batch(env, coords, a_plus, policy, horizons, rng_plus)
    r_minus = rollout_returns_batch(env, coords, a_minus, policy, horizons, rng_minus)

    signal = (r_plus - r_minus) / (1.0 - gamma)
    vectors = weights * signal[:, None]
    return BatchGradients(
        kind="wd",
        vectors=vectors,
        weights=weights,
        horizons=horizons,
        returns=(r_plus, r_minus),
        gamma=gamma,
        transitions=2 * (horizons + 1),
    )


def wd_gradient(
    env: Environment,
    policy: GaussianPolicy,
    state: EnvState,
    rng: np.random.Generator,
    couple_actions: bool = False,
) -> GradientEstimate:
    """One weak-derivative gradient estimate at a single start state."""
    batch = wd_gradient_batch(
        env, policy, state.coordinates[None, :], rng, couple_actions=couple_actions
    )
    return batch.single(0)


def sf_gradient_batch(
    env: Environment,
    policy: GaussianPolicy,
    coords: np.ndarray,
    rng: np.random.Generator,
) -> BatchGradients:
    """n score-function estimates: one rollout each, initial action from the policy."""
    coords = np.asarray(coords, dtype=np.float64)
    n = len(coords)
    gamma = env.spec.gamma
    feats = policy.features.batch(coords)
    means = feats @ policy.theta

    horizons = sample_horizons(gamma, n, rng)
    a0 = means + policy.sigma * rng.standard_normal(n)
    scores = feats * ((a0 - means) / policy.sigma**2)[:, None]
    child = rng.spawn(1)[0]
    r = rollout_returns_batch(env, coords, a0, policy, horizons, child)

    signal = r / (1.0 - gamma)
    vectors = scores * signal[:, None]
    return BatchGradients(
        kind="sf",
        vectors=vectors,
        weights=scores,
        horizons=horizons,
        returns=(r,),
        gamma=gamma,
        transitions=horizons + 1,
    )


def sf_gradient(
    env: Environment,
    policy: GaussianPolicy,
    state: EnvState,
    rng: np.random.Generator,
) -> GradientEstimate:
    """One score-function gradient estimate at a single start state."""
    batch = sf_gradient_batch(env, policy, state.coordinates[None, :], rng)
    return batch.single(0)


def advance_state(
    env: Environment,
    policy: GaussianPolicy,
    state: EnvState,
    steps: int,
    rng: np.random.Generator,
) -> EnvState:
    """Run `steps` on-policy transitions and return the state reached."""
    for _ in range(int(steps)):
        action = policy.sample(state, rng)
        state, _ = env.step(state, action)
    return state


def ergodic_state(
    env: Environment,
    policy: GaussianPolicy,
    state: EnvState,
    gamma: float,
    rng: np.random.Generator,
) -> EnvState:
    """Draw a state from the discounted occupancy measure rooted at `state`.

    Running the policy for a Geom(1 - gamma) number of steps and keeping the
    final state samples the normalized discounted state distribution exactly,
    because the stopping time puts mass (1 - gamma) * gamma^t on step t.
    """
    steps = sample_horizon(gamma, rng)
    return advance_state(env, policy, state, steps, rng)


def ergodic_states_batch(
    env: Environment,
    policy: GaussianPolicy,
    n: int,
    gamma: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """n rows from the discounted occupancy measure rooted at the reset law.

    The gradient estimators are unbiased for the gradient of the from-reset
    return exactly when their start states carry this weighting, so the
    estimator-vs-oracle checks sample starts here rather than from reset.

    Stream layout: n resets, n horizon uniforms, then one shared stream for
    the lockstep on-policy advance (rows drop out as their horizons expire).
    """
    coords = env.reset_batch(n, rng)
    horizons = sample_horizons(gamma, n, rng)
    alive = np.flatnonzero(horizons > 0)
    t = 0
    while alive.size:
        actions = policy.sample_batch(coords[alive], rng)
        coords[alive], _ = env.step_batch(coords[alive], actions)
        t += 1
        alive = alive[horizons[alive] > t]
    return coords
