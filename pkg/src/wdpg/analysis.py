"""Verification tooling: return evaluation, an independent finite-difference
gradient oracle, estimator variance reports, and sample accounting.

Nothing here feeds back into training; these are the measurement instruments
used by the test suite and the CLI verdict commands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from wdpg.env import Environment
from wdpg.estimators import sf_gradient_batch, wd_gradient_batch
from wdpg.policy import GaussianPolicy
from wdpg.training import IterateRecord


@dataclass(frozen=True)
class ReturnEstimate:
    """Monte-Carlo estimate of the discounted return from the reset distribution."""

    mean: float
    std_error: float
    n_trajectories: int
    truncation: int
    gamma: float
    tail_bound: float


def discounted_returns(
    env: Environment,
    policy: GaussianPolicy,
    n: int,
    truncation: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-trajectory sums of gamma^t * r_t for t = 0..truncation inclusive."""
    if n < 1:
        raise ValueError("need at least one trajectory")
    if truncation < 0:
        raise ValueError("truncation must be non-negative")
    gamma = env.spec.gamma
    coords = env.reset_batch(n, rng)
    totals = np.zeros(n)
    discount = 1.0
    for _ in range(truncation + 1):
        actions = policy.sample_batch(coords, rng)
        coords, rewards = env.step_batch(coords, actions)
        totals += discount * rewards
        discount *= gamma
    return totals


def evaluate_return(
    env: Environment,
    policy: GaussianPolicy,
    n_trajectories: int,
    truncation: int,
    rng: np.random.Generator,
) -> ReturnEstimate:
    """Estimate the policy value with an explicit truncation-tail bound."""
    totals = discounted_returns(env, policy, n_trajectories, truncation, rng)
    gamma = env.spec.gamma
    tail = gamma ** (truncation + 1) * env.spec.reward_bound / (1.0 - gamma)
    std_error = (
        float(totals.std(ddof=1) / math.sqrt(n_trajectories))
        if n_trajectories > 1
        else 0.0
    )
    return ReturnEstimate(
        mean=float(totals.mean()),
        std_error=std_error,
        n_trajectories=n_trajectories,
        truncation=truncation,
        gamma=gamma,
        tail_bound=float(tail),
    )


@dataclass(frozen=True)
class FiniteDifferenceGradient:
    """Central-difference gradient of the evaluated return, one coordinate at a time."""

    vector: np.ndarray
    std_error: np.ndarray
    step: float
    n_eval: int
    truncation: int


def finite_difference_gradient(
    env: Environment,
    policy: GaussianPolicy,
    step: float,
    n_eval: int,
    truncation: int,
    rng: np.random.Generator,
) -> FiniteDifferenceGradient:
    """Estimate dJ/dtheta by paired central differences with common random numbers.

    For each coordinate, the +step and -step evaluations replay the identical
    random stream (same resets, same action noise), so the per-trajectory
    differences are smooth in step and their standard error is the honest
    uncertainty of the oracle.
    """
    if step <= 0.0:
        raise ValueError("finite-difference step must be positive")
    if n_eval < 2:
        raise ValueError("need at least two trajectories for a standard error")
    dim = policy.dim
    vector = np.zeros(dim)
    std_error = np.zeros(dim)
    for i in range(dim):
        seed = int(rng.integers(2**63))
        shift = np.zeros(dim)
        shift[i] = step
        plus = discounted_returns(
            env,
            policy.with_theta(policy.theta + shift),
            n_eval,
            truncation,
            np.random.default_rng(seed),
        )
        minus = discounted_returns(
            env,
            policy.with_theta(policy.theta - shift),
            n_eval,
            truncation,
            np.random.default_rng(seed),
        )
        diffs = (plus - minus) / (2.0 * step)
        vector[i] = diffs.mean()
        std_error[i] = diffs.std(ddof=1) / math.sqrt(n_eval)
    return FiniteDifferenceGradient(
        vector=vector,
        std_error=std_error,
        step=step,
        n_eval=n_eval,
        truncation=truncation,
    )


@dataclass(frozen=True)
class VarianceReport:
    """Empirical per-coordinate variance of one estimator at a fixed policy.

    ``g_weak`` is the mean squared norm of the weak-derivative scale vector
    over the sampled start states; ``g_score`` and ``g_density`` are the two
    readings of the score-side curvature constant (squared score norm, and
    squared norm of the density gradient = density * score). ``bound`` is the
    theoretical cap 2*M^2*g_weak/(1-gamma)^5 for the weak-derivative estimator
    and M^2*g_score/(1-gamma)^5 for the score estimator.
    """

    kind: str
    per_coordinate_variance: np.ndarray
    trace: float
    n: int
    theta: np.ndarray
    bound: float
    g_weak: float
    g_score: float
    g_density: float
    gamma: float
    reward_bound: float


def gradient_variance(
    env: Environment,
    policy: GaussianPolicy,
    kind: str,
    n: int,
    rng: np.random.Generator,
    couple_actions: bool = False,
) -> VarianceReport:
    """Draw n independent estimates at fixed theta and report their variance."""
    if n < 2:
        raise ValueError("need at least two estimates for a variance")
    coords = env.reset_batch(n, rng)
    if kind == "wd":
        batch = wd_gradient_batch(env, policy, coords, rng, couple_actions=couple_actions)
    elif kind == "sf":
        batch = sf_gradient_batch(env, policy, coords, rng)
    else:
        raise ValueError(f"unknown estimator kind {kind!r}")
    return variance_report(env, policy, batch, coords, rng)


def variance_report(env, policy, batch, coords, rng) -> VarianceReport:
    """Variance report for an already-drawn batch of estimates.

    ``coords`` must be the start states the batch was drawn at; ``rng``
    provides the fresh action draws behind the measured g_score / g_density.
    """
    per_coord = batch.vectors.var(axis=0, ddof=1)
    trace = float(per_coord.sum())
    kind = batch.kind

    feats = policy.features.batch(coords)
    weak_rows = feats / math.sqrt(2.0 * math.pi * policy.sigma**2)
    g_weak = float((weak_rows**2).sum(axis=1).mean())

    actions = policy.sample_batch(coords, rng)
    scores = policy.score_batch(coords, actions)
    score_sq = (scores**2).sum(axis=1)
    g_score = float(score_sq.mean())
    z = (actions - feats @ policy.theta) / policy.sigma
    density = np.exp(-0.5 * z**2) / math.sqrt(2.0 * math.pi * policy.sigma**2)
    g_density = float((density**2 * score_sq).mean())

    gamma = env.spec.gamma
    m_bound = env.spec.reward_bound
    if kind == "wd":
        bound = 2.0 * m_bound**2 * g_weak / (1.0 - gamma) ** 5
    else:
        bound = m_bound**2 * g_score / (1.0 - gamma) ** 5
    return VarianceReport(
        kind=kind,
        per_coordinate_variance=per_coord,
        trace=trace,
        n=batch.vectors.shape[0],
        theta=policy.theta.copy(),
        bound=bound,
        g_weak=g_weak,
        g_score=g_score,
        g_density=g_density,
        gamma=gamma,
        reward_bound=m_bound,
    )


@dataclass(frozen=True)
class SampleComplexityStats:
    """Phantom-transition accounting over a training history.

    ``predicted_per_iteration`` is rollouts/(1 - gamma) under the inclusive
    horizon convention actually implemented; ``pascal_per_iteration`` is the
    (1 + gamma)/(1 - gamma) figure from the negative-binomial counting
    argument. Their difference, ``convention_gap``, is the exact constant 1
    for the two-rollout estimator (one extra transition per rollout).
    """

    kind: str
    iterations: int
    mean_per_iteration: float
    std_error: float
    predicted_per_iteration: float
    pascal_per_iteration: float
    convention_gap: float
    total_transitions: int


def sample_complexity_stats(
    records: list[IterateRecord], gamma: float | None = None
) -> SampleComplexityStats:
    """Compare measured phantom transitions per iteration with the predictions."""
    if not records:
        raise ValueError("empty training history")
    kind = records[0].grad.kind
    if gamma is None:
        gamma = records[0].grad.gamma
    used = np.array([rec.grad.transitions_used for rec in records], dtype=np.float64)
    rollouts = 2.0 if kind == "wd" else 1.0
    predicted = rollouts / (1.0 - gamma)
    pascal = (1.0 + gamma) / (1.0 - gamma)
    gap = (rollouts - 1.0 - gamma) / (1.0 - gamma)
    std_error = (
        float(used.std(ddof=1) / math.sqrt(len(used))) if len(used) > 1 else 0.0
    )
    return SampleComplexityStats(
        kind=kind,
        iterations=len(records),
        mean_per_iteration=float(used.mean()),
        std_error=std_error,
        predicted_per_iteration=predicted,
        pascal_per_iteration=pascal,
        convention_gap=gap,
        total_transitions=int(used.sum()),
    )


def stationarity_trace(records: list[IterateRecord]) -> list[tuple[int, float]]:
    """Running minimum of the squared estimate norm, the usual progress proxy."""
    trace: list[tuple[int, float]] = []
    best = math.inf
    for rec in records:
        norm_sq = float(rec.grad.vector @ rec.grad.vector)
        best = min(best, norm_sq)
        trace.append((rec.k, best))
    return trace


def bootstrap_mean_interval(
    values: np.ndarray,
    rng: np.random.Generator,
    n_boot: int = 10000,
    lower: float = 0.025,
    upper: float = 0.975,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of a small sample."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n < 2:
        raise ValueError("need at least two values to bootstrap")
    idx = rng.integers(0, n, size=(n_boot, n))
    means = values[idx].mean(axis=1)
    return (
        float(np.quantile(means, lower)),
        float(np.quantile(means, upper)),
    )


def variance_ordering_confidence(
    wd_vectors: np.ndarray,
    sf_vectors: np.ndarray,
    rng: np.random.Generator,
    n_boot: int = 1000,
) -> tuple[float, np.ndarray]:
    """Paired-bootstrap confidence that trace Var(wd) < trace Var(sf).

    Each replicate resamples estimate indices (the same index set for both
    estimators) and recomputes the two variance traces; returns the fraction
    of replicates with the expected ordering plus the raw trace differences.
    """
    wd_vectors = np.asarray(wd_vectors, dtype=np.float64)
    sf_vectors = np.asarray(sf_vectors, dtype=np.float64)
    if len(wd_vectors) != len(sf_vectors):
        raise ValueError("paired bootstrap needs equally many estimates")
    n = len(wd_vectors)
    if n < 2:
        raise ValueError("need at least two estimates")
    diffs = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, size=n)
        trace_wd = wd_vectors[idx].var(axis=0, ddof=1).sum()
        trace_sf = sf_vectors[idx].var(axis=0, ddof=1).sum()
        diffs[b] = trace_sf - trace_wd
    confidence = float(np.mean(diffs > 0.0))
    return confidence, diffs
