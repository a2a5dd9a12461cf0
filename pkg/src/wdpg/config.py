"""Experiment configuration files, seed derivation, and run manifests.

Configs are single YAML documents with nested sections (env, policy, train,
evaluation, analysis). Parsing is strict: unknown keys raise instead of being
ignored. Every run writes a JSON manifest containing the config snapshot, the
code version, all derived sub-task seeds, timestamps, a hashed inventory of
the output files, and the gate results — including when the run fails.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from wdpg.env import Environment, make_env
from wdpg.policy import GaussianPolicy, make_features
from wdpg.training import TrainConfig


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class EnvConfig:
    name: str
    gamma: float
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PolicyConfig:
    features: str
    sigma: float = 1.0
    theta0: tuple[float, ...] | str = "zeros"


@dataclass(frozen=True)
class EvalConfig:
    n_trajectories: int = 50
    truncation: int = 500


@dataclass(frozen=True)
class AnalysisConfig:
    """Knobs for the verdict commands (gradcheck / variance / complexity)."""

    thetas: tuple[float, ...] = (-1.0, 0.0, 1.0)
    gradcheck_estimates: int = 1_000_000
    fd_step: float = 1e-2
    fd_trajectories: int = 200_000
    fd_truncation: int = 150
    variance_estimates: int = 100_000
    bootstrap_replicates: int = 1000
    complexity_iterations: int = 10_000


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    env: EnvConfig
    policy: PolicyConfig
    train: TrainConfig
    evaluation: EvalConfig = EvalConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    n_seeds: int = 1
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be non-negative")
        if self.train.gamma != self.env.gamma:
            raise ConfigError("train.gamma must equal env.gamma")


# train.gamma mirrors env.gamma and train.seed is derived per run, so neither
# appears in the file format.
_TRAIN_FILE_FIELDS = (
    "iterations",
    "kind",
    "step_scale",
    "step_exponent",
    "eval_every",
    "start_state",
    "episode_len",
    "couple_actions",
)


def _check_keys(section: str, data: dict, allowed: tuple[str, ...]) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {', '.join(unknown)}")


def config_from_dict(data: dict) -> ExperimentConfig:
    _check_keys(
        "experiment",
        data,
        ("name", "env", "policy", "train", "evaluation", "analysis", "n_seeds", "master_seed"),
    )
    for required in ("name", "env", "policy", "train"):
        if required not in data:
            raise ConfigError(f"missing required section {required!r}")

    env_data = dict(data["env"])
    _check_keys("env", env_data, ("name", "gamma", "params"))
    if "name" not in env_data or "gamma" not in env_data:
        raise ConfigError("env section needs 'name' and 'gamma'")
    env = EnvConfig(
        name=str(env_data["name"]),
        gamma=float(env_data["gamma"]),
        params=dict(env_data.get("params", {})),
    )

    pol_data = dict(data["policy"])
    _check_keys("policy", pol_data, ("features", "sigma", "theta0"))
    if "features" not in pol_data:
        raise ConfigError("policy section needs 'features'")
    theta0 = pol_data.get("theta0", "zeros")
    if isinstance(theta0, str):
        if theta0 != "zeros":
            raise ConfigError("theta0 must be 'zeros' or a list of numbers")
    else:
        theta0 = tuple(float(v) for v in theta0)
    policy = PolicyConfig(
        features=str(pol_data["features"]),
        sigma=float(pol_data.get("sigma", 1.0)),
        theta0=theta0,
    )

    train_data = dict(data["train"])
    _check_keys("train", train_data, _TRAIN_FILE_FIELDS)
    try:
        train = TrainConfig(gamma=env.gamma, seed=0, **train_data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad train section: {exc}") from exc

    eval_data = dict(data.get("evaluation", {}))
    _check_keys("evaluation", eval_data, ("n_trajectories", "truncation"))
    evaluation = EvalConfig(
        n_trajectories=int(eval_data.get("n_trajectories", 50)),
        truncation=int(eval_data.get("truncation", 500)),
    )

    ana_data = dict(data.get("analysis", {}))
    _check_keys(
        "analysis",
        ana_data,
        (
            "thetas",
            "gradcheck_estimates",
            "fd_step",
            "fd_trajectories",
            "fd_truncation",
            "variance_estimates",
            "bootstrap_replicates",
            "complexity_iterations",
        ),
    )
    defaults = AnalysisConfig()
    analysis = AnalysisConfig(
        thetas=tuple(float(t) for t in ana_data.get("thetas", defaults.thetas)),
        gradcheck_estimates=int(
            ana_data.get("gradcheck_estimates", defaults.gradcheck_estimates)
        ),
        fd_step=float(ana_data.get("fd_step", defaults.fd_step)),
        fd_trajectories=int(ana_data.get("fd_trajectories", defaults.fd_trajectories)),
        fd_truncation=int(ana_data.get("fd_truncation", defaults.fd_truncation)),
        variance_estimates=int(
            ana_data.get("variance_estimates", defaults.variance_estimates)
        ),
        bootstrap_replicates=int(
            ana_data.get("bootstrap_replicates", defaults.bootstrap_replicates)
        ),
        complexity_iterations=int(
            ana_data.get("complexity_iterations", defaults.complexity_iterations)
        ),
    )

    try:
        return ExperimentConfig(
            name=str(data["name"]),
            env=env,
            policy=policy,
            train=train,
            evaluation=evaluation,
            analysis=analysis,
            n_seeds=int(data.get("n_seeds", 1)),
            master_seed=int(data.get("master_seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(config: ExperimentConfig) -> dict:
    """Plain-YAML-types dict; inverse of config_from_dict."""
    theta0 = config.policy.theta0
    return {
        "name": config.name,
        "env": {
            "name": config.env.name,
            "gamma": config.env.gamma,
            "params": dict(config.env.params),
        },
        "policy": {
            "features": config.policy.features,
            "sigma": config.policy.sigma,
            "theta0": list(theta0) if not isinstance(theta0, str) else theta0,
        },
        "train": {name: getattr(config.train, name) for name in _TRAIN_FILE_FIELDS},
        "evaluation": dataclasses.asdict(config.evaluation),
        "analysis": {
            **dataclasses.asdict(config.analysis),
            "thetas": list(config.analysis.thetas),
        },
        "n_seeds": config.n_seeds,
        "master_seed": config.master_seed,
    }


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    return config_from_dict(raw)


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(
        yaml.safe_dump(config_to_dict(config), sort_keys=True, default_flow_style=False)
    )


def build_env(config: ExperimentConfig) -> Environment:
    try:
        return make_env(config.env.name, config.env.gamma, **config.env.params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad env section: {exc}") from exc


def build_policy(config: ExperimentConfig, env: Environment) -> GaussianPolicy:
    try:
        features = make_features(config.policy.features, env.spec.state_dim)
        if isinstance(config.policy.theta0, str):
            theta0 = np.zeros(features.dim)
        else:
            theta0 = np.asarray(config.policy.theta0, dtype=np.float64)
        return GaussianPolicy(theta=theta0, sigma=config.policy.sigma, features=features)
    except ValueError as exc:
        raise ConfigError(f"bad policy section: {exc}") from exc


def train_config_for_seed(
    config: ExperimentConfig, seed: int, kind: str | None = None
) -> TrainConfig:
    """The file-level train settings specialized to one derived seed (and kind)."""
    if kind is None:
        return replace(config.train, seed=seed)
    return replace(config.train, seed=seed, kind=kind)


def subtask_seed(master_seed: int, *path: int) -> int:
    """Derive a 64-bit sub-task seed from the master seed and a counter path.

    Uses SeedSequence(master, spawn_key=path): documented, collision-resistant,
    and stable across processes, so any sub-task can be reseeded independently
    of execution order or worker count.
    """
    seq = np.random.SeedSequence(master_seed, spawn_key=tuple(int(p) for p in path))
    return int(seq.generate_state(1, np.uint64)[0])


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    """Record of one CLI run; always written, including on failure."""

    command: str
    config: dict
    code_version: str
    master_seed: int
    derived_seeds: dict = field(default_factory=dict)
    started_at: str = field(default_factory=_utc_now)
    finished_at: str = ""
    outputs: list = field(default_factory=list)
    gates: list = field(default_factory=list)
    status: str = "running"
    error: str | None = None

    def add_outputs(self, out_dir: Path, names: list[str]) -> None:
        for name in names:
            target = out_dir / name
            payload = target.read_bytes()
            self.outputs.append(
                {
                    "path": name,
                    "bytes": len(payload),
                    "sha256": hashlib.sha256(payload).hexdigest(),
                }
            )

    def finish(self, status: str, error: str | None = None) -> None:
        self.finished_at = _utc_now()
        self.status = status
        self.error = error

    def write(self, out_dir: Path) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        target = out_dir / "manifest.json"
        target.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True))
        return target
