"""MEWMA recursion, score-moment estimation, and Hotelling T².

z_i = lam*s_i + (1-lam)*z_{i-1} starting from z_0 = 0. Moments use the
population (1/n) normalization. T² is evaluated against the regularized
covariance (cov + epsilon*I); the inverse is factored once and cached.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConditioningError, InputError


@dataclass(frozen=True)
class MewmaState:
    """Smoothed score vector z after i observations (z = 0 at i = 0)."""

    z: np.ndarray
    i: int
    lam: float

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        if not np.isfinite(z).all():
            raise InputError("MEWMA state must be finite")
        if not 0.0 < self.lam < 1.0:
            raise InputError(f"lambda must be in (0,1), got {self.lam}")
        if self.i < 0:
            raise InputError("observation index must be >= 0")
        if self.i == 0 and np.any(z != 0.0):
            raise InputError("z must be zero at i = 0")
        object.__setattr__(self, "z", z)


def mewma_init(dim: int, lam: float) -> MewmaState:
    return MewmaState(z=np.zeros(dim), i=0, lam=lam)


def update(state: MewmaState, s) -> MewmaState:
    s = np.asarray(s, dtype=np.float64)
    if s.shape != state.z.shape:
        raise InputError(f"score has shape {s.shape}, state expects {state.z.shape}")
    z = state.lam * s + (1.0 - state.lam) * state.z
    return MewmaState(z=z, i=state.i + 1, lam=state.lam)


@dataclass(frozen=True)
class ScoreMoments:
    """Sample mean, population covariance, and cached precision of a
    score collection. epsilon is the ridge added before inversion."""

    mean: np.ndarray
    cov: np.ndarray
    epsilon: float
    precision: np.ndarray

    def __post_init__(self):
        for name in ("mean", "cov", "precision"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.isfinite(arr).all():
                raise InputError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        d = self.mean.size
        if self.cov.shape != (d, d) or self.precision.shape != (d, d):
            raise InputError("mean, cov and precision dimensions disagree")
        if not np.allclose(self.cov, self.cov.T, atol=1e-12):
            raise InputError("cov must be symmetric")
        if self.epsilon < 0:
            raise InputError(f"epsilon must be >= 0, got {self.epsilon}")

    @property
    def dim(self) -> int:
        return self.mean.size


def default_epsilon(cov: np.ndarray) -> float:
    return 1e-8 * float(np.trace(cov)) / cov.shape[0]


def moments_from(mean, cov, epsilon: float) -> ScoreMoments:
    """Build ScoreMoments from known mean/cov, factoring cov+epsilon*I."""
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    d = mean.size
    if cov.shape != (d, d):
        raise InputError(f"cov shape {cov.shape} does not match mean length {d}")
    if epsilon < 0:
        raise InputError(f"epsilon must be >= 0, got {epsilon}")
    reg = cov + epsilon * np.eye(d)
    try:
        c, low = scipy.linalg.cho_factor(reg)
        precision = scipy.linalg.cho_solve((c, low), np.eye(d))
    except scipy.linalg.LinAlgError as exc:
        raise ConditioningError(
            f"covariance plus epsilon={epsilon:g} is not positive definite; "
            "increase epsilon") from exc
    precision = (precision + precision.T) / 2.0
    if not np.allclose(precision @ reg, np.eye(d), atol=1e-8):
        raise ConditioningError(
            f"inverse of covariance plus epsilon={epsilon:g} failed its "
            "residual check; increase epsilon")
    return ScoreMoments(mean=mean, cov=cov, epsilon=float(epsilon),
                        precision=precision)


def estimate_moments(scores, epsilon: float | None = None) -> ScoreMoments:
    """Moments of a score collection; epsilon defaults to
    1e-8*trace(cov)/d when not given."""
    S = np.asarray(scores, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] < 2:
        raise InputError("need at least two score vectors of common dimension")
    if not np.isfinite(S).all():
        raise InputError("scores contain non-finite values")
    n = S.shape[0]
    mean = S.mean(axis=0)
    centered = S - mean
    cov = (centered.T @ centered) / n
    cov = (cov + cov.T) / 2.0
    if epsilon is None:
        epsilon = default_epsilon(cov)
    return moments_from(mean, cov, epsilon)


def t2(z, moments: ScoreMoments, shrink: float = 1.0) -> float:
    """(z/shrink - mean)' precision (z/shrink - mean).

    shrink=1 for live monitoring; sqrt(k) inside the inner bootstrap,
    where only z is rescaled, not the mean.
    """
    if not shrink > 0:
        raise InputError(f"shrink must be > 0, got {shrink}")
    z = np.asarray(z, dtype=np.float64)
    diff = z / shrink - moments.mean
    val = float(diff @ moments.precision @ diff)
    # Roundoff can push an exact zero a hair negative.
    return max(val, 0.0)
