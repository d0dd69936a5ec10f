"""Closed-form ridge regression and its per-observation score vectors.

The model is y = theta0 + theta1*x1 + ... + thetap*xp fit by minimizing
sum_i (y_i - xt_i @ theta)^2 + gamma * ||theta||^2, where xt is the
predictor row augmented with a leading 1. The penalty covers the full
theta, intercept included. Solving the normal equations exactly makes
the training scores average to zero up to solver roundoff, which the
monitoring statistics rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import DegenerateDesignError, InputError


def _augment(X: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((X.shape[0], 1)), X])


@dataclass(frozen=True)
class FittedLinearModel:
    """Ridge fit artifact: coefficients (intercept first) plus the
    hyperparameters needed to evaluate score vectors later."""

    theta: np.ndarray
    gamma: float
    n_train: int

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.ndim != 1 or not np.isfinite(theta).all():
            raise InputError("theta must be a finite vector")
        object.__setattr__(self, "theta", theta)

    @property
    def p(self) -> int:
        return self.theta.size - 1

    @property
    def score_dim(self) -> int:
        return self.theta.size

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _augment(np.asarray(X, dtype=np.float64)) @ self.theta

    def scores(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Score vectors for each row: (y - xt@theta)*xt - (gamma/n)*theta."""
        Xt = _augment(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64)
        resid = y - Xt @ self.theta
        return resid[:, None] * Xt - (self.gamma / self.n_train) * self.theta

    def to_dict(self) -> dict:
        return {"kind": "ridge", "theta": self.theta.tolist(),
                "gamma": self.gamma, "n_train": self.n_train}

    @classmethod
    def from_dict(cls, d: dict) -> "FittedLinearModel":
        return cls(theta=np.asarray(d["theta"], dtype=np.float64),
                   gamma=float(d["gamma"]), n_train=int(d["n_train"]))


def fit_ridge(data: Dataset, gamma: float) -> FittedLinearModel:
    """Solve (Xt'Xt + gamma*I) theta = Xt'y exactly."""
    if not np.isfinite(gamma) or gamma < 0:
        raise InputError(f"gamma must be a finite value >= 0, got {gamma}")
    # Without a penalty the normal equations need residual degrees of
    # freedom; with gamma > 0 the system is positive definite at any n.
    if gamma == 0 and data.n < data.p + 2:
        raise InputError(f"need at least p+2={data.p + 2} rows when "
                         f"gamma=0, got {data.n}")
    Xt = _augment(data.X)
    d = Xt.shape[1]
    A = Xt.T @ Xt + gamma * np.eye(d)
    b = Xt.T @ data.y
    # With gamma=0 the normal matrix can be exactly singular (e.g. a
    # constant predictor column); LAPACK may still return garbage, so
    # check conditioning explicitly.
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= sv[0] * 1e-12:
        raise DegenerateDesignError(
            "normal matrix is singular; add regularization (gamma > 0) "
            "or drop collinear predictors")
    theta = np.linalg.solve(A, b)
    return FittedLinearModel(theta=theta, gamma=float(gamma), n_train=data.n)


def score_linear(model: FittedLinearModel, x, y) -> np.ndarray:
    """Score vector of a single observation, length p+1."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.size != model.p:
        raise InputError(f"predictor row has {x.size} entries, model expects {model.p}")
    if not (np.isfinite(x).all() and np.isfinite(y)):
        raise InputError("score inputs must be finite")
    return model.scores(x[None, :], np.asarray([y], dtype=np.float64))[0]
