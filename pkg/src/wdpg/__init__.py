"""Weak-derivative policy gradients for continuous-action discounted MDPs.

The package provides Gaussian policies whose parameter gradient is written as a
signed difference of two reflected-Rayleigh measures, an unbiased two-phantom
gradient estimator built on a shared geometric random horizon, a score-function
baseline estimator, a stochastic-approximation training loop, and the analysis
tools (finite-difference oracle, variance reports, sample accounting) used to
verify the estimators' statistical claims at desk scale.
"""

from wdpg.env import (
    ConstRewardEnv,
    Environment,
    EnvSpec,
    EnvState,
    GaussianBanditEnv,
    PendulumEnv,
    PendulumParams,
    make_env,
    pendulum_reset,
    pendulum_reward,
    pendulum_step,
    wrap_angle,
)
from wdpg.policy import (
    ConstantFeatures,
    FeatureMap,
    GaussianPolicy,
    IdentityFeatures,
    JordanPair,
    PendulumFeatures,
    jordan_decompose,
    make_features,
    rayleigh_offsets,
)
from wdpg.estimators import (
    BatchGradients,
    GradientEstimate,
    RolloutResult,
    advance_state,
    ergodic_state,
    ergodic_states_batch,
    rollout_return,
    rollout_returns_batch,
    sample_horizon,
    sample_horizons,
    sf_gradient,
    sf_gradient_batch,
    wd_gradient,
    wd_gradient_batch,
)
from wdpg.training import IterateRecord, TrainConfig, TrainResult, step_size, train
from wdpg.analysis import (
    FiniteDifferenceGradient,
    ReturnEstimate,
    SampleComplexityStats,
    VarianceReport,
    bootstrap_mean_interval,
    discounted_returns,
    evaluate_return,
    finite_difference_gradient,
    gradient_variance,
    sample_complexity_stats,
    stationarity_trace,
    variance_ordering_confidence,
    variance_report,
)
from wdpg.config import (
    ConfigError,
    EnvConfig,
    EvalConfig,
    AnalysisConfig,
    ExperimentConfig,
    PolicyConfig,
    RunManifest,
    load_config,
    save_config,
    subtask_seed,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig",
    "BatchGradients",
    "ConfigError",
    "ConstRewardEnv",
    "ConstantFeatures",
    "EnvConfig",
    "EnvSpec",
    "EnvState",
    "Environment",
    "EvalConfig",
    "ExperimentConfig",
    "FeatureMap",
    "FiniteDifferenceGradient",
    "GaussianBanditEnv",
    "GaussianPolicy",
    "GradientEstimate",
    "IdentityFeatures",
    "IterateRecord",
    "JordanPair",
    "PendulumEnv",
    "PendulumFeatures",
    "PendulumParams",
    "PolicyConfig",
    "ReturnEstimate",
    "RolloutResult",
    "RunManifest",
    "SampleComplexityStats",
    "TrainConfig",
    "TrainResult",
    "VarianceReport",
    "advance_state",
    "bootstrap_mean_interval",
    "discounted_returns",
    "ergodic_state",
    "ergodic_states_batch",
    "evaluate_return",
    "finite_difference_gradient",
    "gradient_variance",
    "jordan_decompose",
    "load_config",
    "make_env",
    "make_features",
    "pendulum_reset",
    "pendulum_reward",
    "pendulum_step",
    "rayleigh_offsets",
    "rollout_return",
    "rollout_returns_batch",
    "sample_complexity_stats",
    "sample_horizon",
    "sample_horizons",
    "save_config",
    "sf_gradient",
    "sf_gradient_batch",
    "stationarity_trace",
    "step_size",
    "subtask_seed",
    "train",
    "variance_ordering_confidence",
    "variance_report",
    "wd_gradient",
    "wd_gradient_batch",
    "wrap_angle",
]
