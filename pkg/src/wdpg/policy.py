"""Linear-Gaussian policies and the signed decomposition of their gradient.

A policy is N(theta' phi(x), sigma^2) over a scalar action. Its derivative with
respect to theta factors, coordinate-wise, as

    d/d theta_i mu_theta(a|x) = g_i(theta, x) * (mu_plus(a|x) - mu_minus(a|x)),

where g(theta, x) = phi(x) / sqrt(2 pi sigma^2) and mu_plus / mu_minus are the
Rayleigh law reflected about the policy mean, supported on the half-lines above
and below the mean respectively. Sampling either component is exact via the
inverse CDF: mean +/- sigma * sqrt(-2 ln U).
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace

import numpy as np

from wdpg.env import EnvState


class FeatureMap(ABC):
    """State-to-feature transform shared by the policy mean and the gradient scale."""

    name: str

    @property
    @abstractmethod
    def dim(self) -> int:
        """Length of the feature vector."""

    @abstractmethod
    def batch(self, coords: np.ndarray) -> np.ndarray:
        """Map (n, state_dim) coordinates to (n, dim) features."""

    def __call__(self, state: EnvState) -> np.ndarray:
        return self.batch(state.coordinates[None, :])[0]


class PendulumFeatures(FeatureMap):
    """(cos angle, sin angle, angular velocity) — the usual trig observation."""

    name = "pendulum"

    @property
    def dim(self) -> int:
        return 3

    def batch(self, coords: np.ndarray) -> np.ndarray:
        return np.column_stack(
            [np.cos(coords[:, 0]), np.sin(coords[:, 0]), coords[:, 1]]
        )


class ConstantFeatures(FeatureMap):
    """phi(x) = (1,): the policy mean is theta itself; used by the 1-state envs."""

    name = "constant"

    @property
    def dim(self) -> int:
        return 1

    def batch(self, coords: np.ndarray) -> np.ndarray:
        return np.ones((len(coords), 1))


class IdentityFeatures(FeatureMap):
    name = "identity"

    def __init__(self, state_dim: int):
        self._dim = int(state_dim)

    @property
    def dim(self) -> int:
        return self._dim

    def batch(self, coords: np.ndarray) -> np.ndarray:
        if coords.shape[1] != self._dim:
            raise ValueError("identity features: state dimension mismatch")
        return np.asarray(coords, dtype=np.float64)


def make_features(name: str, state_dim: int | None = None) -> FeatureMap:
    """Build a feature map by name ('pendulum', 'constant', 'identity')."""
    if name == "pendulum":
        return PendulumFeatures()
    if name == "constant":
        return ConstantFeatures()
    if name == "identity":
        if state_dim is None:
            raise ValueError("identity features need the state dimension")
        return IdentityFeatures(state_dim)
    raise ValueError(f"unknown feature map {name!r}")


@dataclass(frozen=True)
class GaussianPolicy:
    """Gaussian policy with linear-in-features mean and fixed exploration scale."""

    theta: np.ndarray
    sigma: float
    features: FeatureMap

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.ndim != 1:
            raise ValueError("theta must be a 1-d vector")
        if theta.shape[0] != self.features.dim:
            raise ValueError(
                f"theta has length {theta.shape[0]} but features produce "
                f"{self.features.dim} components"
            )
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise ValueError("sigma must be finite and positive")
        object.__setattr__(self, "theta", theta)

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    def with_theta(self, theta: np.ndarray) -> "GaussianPolicy":
        return replace(self, theta=np.asarray(theta, dtype=np.float64))

    def mean_batch(self, coords: np.ndarray) -> np.ndarray:
        return self.features.batch(coords) @ self.theta

    def mean(self, state: EnvState) -> float:
        return float(self.mean_batch(state.coordinates[None, :])[0])

    def sample_batch(self, coords: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.mean_batch(coords) + self.sigma * rng.standard_normal(len(coords))

    def sample(self, state: EnvState, rng: np.random.Generator) -> float:
        return float(self.sample_batch(state.coordinates[None, :], rng)[0])

    def score_batch(self, coords: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Gradient of the log-density in theta, rows (a - m)/sigma^2 * phi(x)."""
        feats = self.features.batch(coords)
        actions = np.asarray(actions, dtype=np.float64)
        pull = (actions - feats @ self.theta) / self.sigma**2
        return feats * pull[:, None]

    def score(self, state: EnvState, action: float) -> np.ndarray:
        return self.score_batch(
            state.coordinates[None, :], np.asarray([action], dtype=np.float64)
        )[0]

    def action_density(self, state: EnvState, action) -> float | np.ndarray:
        """Gaussian pdf of the action at this state (vectorized over actions)."""
        action = np.asarray(action, dtype=np.float64)
        m = self.mean(state)
        z = (action - m) / self.sigma
        dens = np.exp(-0.5 * z**2) / math.sqrt(2.0 * math.pi * self.sigma**2)
        if dens.ndim == 0:
            return float(dens)
        return dens


def rayleigh_offsets(sigma: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n Rayleigh(sigma) radii by inverse CDF, sigma * sqrt(-2 ln U), U in (0, 1]."""
    u = 1.0 - rng.random(n)
    return sigma * np.sqrt(-2.0 * np.log(u))


@dataclass(frozen=True)
class JordanPair:
    """Signed decomposition of a Gaussian policy's theta-gradient at one state.

    ``weight`` is the vector scale phi(x)/sqrt(2 pi sigma^2); the positive and
    negative components are the Rayleigh law reflected about ``mean``, living on
    disjoint half-lines (their product is identically zero).
    """

    weight: np.ndarray
    mean: float
    sigma: float

    def sample_positive(self, rng: np.random.Generator) -> float:
        """One draw from the component supported on actions above the mean."""
        return float(self.mean + rayleigh_offsets(self.sigma, 1, rng)[0])

    def sample_negative(self, rng: np.random.Generator) -> float:
        """One draw from the component supported on actions below the mean."""
        return float(self.mean - rayleigh_offsets(self.sigma, 1, rng)[0])

    def component_density(self, action, positive: bool):
        """Density of one signed component; each integrates to 1 on its half-line."""
        action = np.asarray(action, dtype=np.float64)
        offset = action - self.mean if positive else self.mean - action
        radial = np.where(
            offset > 0.0,
            offset / self.sigma**2 * np.exp(-0.5 * (offset / self.sigma) ** 2),
            0.0,
        )
        if radial.ndim == 0:
            return float(radial)
        return radial


def jordan_decompose(policy: GaussianPolicy, state: EnvState) -> JordanPair:
    """Split d mu_theta(.|x) / d theta into scale and signed probability pair."""
    feats = policy.features(state)
    weight = feats / math.sqrt(2.0 * math.pi * policy.sigma**2)
    return JordanPair(weight=weight, mean=policy.mean(state), sigma=policy.sigma)
