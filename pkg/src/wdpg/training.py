"""Stochastic-approximation training loop over the random-horizon estimators.

Each iteration estimates the gradient at a start state (the live trajectory
state by default, or a fresh discounted-occupancy draw), applies
theta <- theta + scale * k^(-exponent) * estimate, then advances the live
trajectory one step under the updated policy. Divergence (non-finite
parameters) aborts with a diagnostic record instead of clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from wdpg.env import Environment
from wdpg.estimators import (
    GradientEstimate,
    advance_state,
    sample_horizon,
    sf_gradient,
    wd_gradient,
)
from wdpg.policy import GaussianPolicy

ESTIMATOR_KINDS = ("wd", "sf")
START_STATE_MODES = ("real", "ergodic")


def step_size(k: int, exponent: float = 0.5, scale: float = 1.0) -> float:
    """Diminishing step scale * k^(-exponent) for iteration k >= 1."""
    if k < 1:
        raise ValueError("iterations are numbered from 1")
    if not (0.0 < exponent < 1.0):
        raise ValueError("step exponent must lie strictly inside (0, 1)")
    if not (math.isfinite(scale) and scale > 0.0):
        raise ValueError("step scale must be finite and positive")
    return scale * float(k) ** (-exponent)


@dataclass(frozen=True)
class TrainConfig:
    """Everything the training loop needs besides the env and initial policy."""

    iterations: int
    gamma: float
    kind: str = "wd"
    step_scale: float = 1.0
    step_exponent: float = 0.5
    seed: int = 0
    eval_every: int = 100
    start_state: str = "real"
    episode_len: int = 200
    couple_actions: bool = False

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie strictly inside (0, 1)")
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"kind must be one of {ESTIMATOR_KINDS}")
        if self.start_state not in START_STATE_MODES:
            raise ValueError(f"start_state must be one of {START_STATE_MODES}")
        if self.eval_every < 1 or self.episode_len < 1:
            raise ValueError("eval_every and episode_len must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        # validates scale/exponent ranges
        step_size(1, self.step_exponent, self.step_scale)


@dataclass(frozen=True)
class IterateRecord:
    """State of the optimization at iteration k (1-based).

    ``theta`` is the parameter the gradient was estimated at, i.e. the iterate
    *before* this iteration's update; ``cumulative_transitions`` counts every
    simulator transition consumed so far (phantom rollouts plus live-trajectory
    and occupancy-sampling steps).
    """

    k: int
    theta: np.ndarray
    grad: GradientEstimate
    step: float
    cumulative_transitions: int


@dataclass
class TrainResult:
    records: list[IterateRecord]
    final_theta: np.ndarray
    aborted: bool = False
    abort_reason: str | None = None

    def theta_after(self, n: int) -> np.ndarray:
        """Parameter vector after n updates (n = 0 is the initial point)."""
        if n < 0 or n > len(self.records):
            raise ValueError(f"n must lie in [0, {len(self.records)}]")
        if n < len(self.records):
            return self.records[n].theta
        return self.final_theta


def train(
    env: Environment,
    policy: GaussianPolicy,
    config: TrainConfig,
    rng: np.random.Generator | None = None,
) -> TrainResult:
    """Run the full loop; returns every iterate plus the final parameters."""
    if config.gamma != env.spec.gamma:
        raise ValueError(
            "config gamma and environment gamma disagree "
            f"({config.gamma} vs {env.spec.gamma})"
        )
    if rng is None:
        rng = np.random.default_rng(config.seed)

    records: list[IterateRecord] = []
    cumulative = 0
    real_state = env.reset(rng)
    steps_since_reset = 0

    for k in range(1, config.iterations + 1):
        if config.start_state == "real":
            x0 = real_state
        else:
            occupancy_steps = sample_horizon(config.gamma, rng)
            x0 = advance_state(env, policy, env.reset(rng), occupancy_steps, rng)
            cumulative += occupancy_steps

        if config.kind == "wd":
            grad = wd_gradient(
                env, policy, x0, rng, couple_actions=config.couple_actions
            )
        else:
            grad = sf_gradient(env, policy, x0, rng)
        cumulative += grad.transitions_used

        step = step_size(k, config.step_exponent, config.step_scale)
        theta_next = policy.theta + step * grad.vector

        if not np.all(np.isfinite(theta_next)):
            records.append(
                IterateRecord(
                    k=k,
                    theta=policy.theta.copy(),
                    grad=grad,
                    step=step,
                    cumulative_transitions=cumulative,
                )
            )
            return TrainResult(
                records=records,
                final_theta=theta_next,
                aborted=True,
                abort_reason=f"non-finite parameters at iteration {k}",
            )

        next_policy = policy.with_theta(theta_next)

        if config.start_state == "real":
            action = next_policy.sample(real_state, rng)
            real_state, _ = env.step(real_state, action)
            cumulative += 1
            steps_since_reset += 1
            if steps_since_reset >= config.episode_len:
                real_state = env.reset(rng)
                steps_since_reset = 0

        records.append(
            IterateRecord(
                k=k,
                theta=policy.theta.copy(),
                grad=grad,
                step=step,
                cumulative_transitions=cumulative,
            )
        )
        policy = next_policy

    return TrainResult(records=records, final_theta=policy.theta.copy())
