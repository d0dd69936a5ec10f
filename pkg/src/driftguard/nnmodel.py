"""One-hidden-layer ReLU network (4 units) with Gaussian likelihood.

Only the output layer theta = (w, b) is monitored for drift; the hidden
layer is refit together with everything else but treated as frozen when
scores are taken. Training is full-batch gradient descent with a fixed
step size and hand-coded gradients: determinism and reproducibility
outrank speed at this size, and the fixed architecture keeps the
gradient code short.

Objective: mean squared error plus (gamma/n)*(||W1||^2 + ||b1||^2 +
||w||^2 + b^2). After training, sigma2 is frozen at the mean squared
training residual (maximum-likelihood plug-in).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .dataset import Dataset
from .errors import FitWarning, InputError
from .rng import substream

HIDDEN = 4


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings. Full-size fits use the defaults;
    refit_epochs is the (warm-started) budget for bootstrap refits.

    A 4-unit ReLU net has sticky bad local minima, so a cold fit tries
    `restarts` seeded inits: each runs for scout_epochs, the one with the
    lowest penalized loss gets the remaining budget. Warm starts skip
    the scout entirely.
    """

    epochs: int = 40000
    step_size: float = 0.1
    seed: int = 0
    grad_tol: float = 1e-3
    refit_epochs: int = 2000
    restarts: int = 5
    scout_epochs: int = 5000

    def __post_init__(self):
        if self.epochs < 1 or self.refit_epochs < 1:
            raise InputError("epoch counts must be >= 1")
        if not self.step_size > 0:
            raise InputError("step_size must be > 0")
        if not self.grad_tol > 0:
            raise InputError("grad_tol must be > 0")
        if self.restarts < 1 or self.scout_epochs < 0:
            raise InputError("restarts must be >= 1 and scout_epochs >= 0")


@dataclass(frozen=True)
class FittedMLP:
    W1: np.ndarray      # (4, p) hidden weights
    b1: np.ndarray      # (4,) hidden biases
    w: np.ndarray       # (4,) output weights
    b: float            # output bias
    gamma: float
    sigma2: float
    n_train: int
    converged: bool = True
    grad_norm: float = 0.0

    def __post_init__(self):
        for name in ("W1", "b1", "w"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.isfinite(arr).all():
                raise InputError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        if not (math.isfinite(self.b) and math.isfinite(self.sigma2)):
            raise InputError("b and sigma2 must be finite")
        if not self.sigma2 > 0:
            raise InputError("sigma2 must be > 0")

    @property
    def p(self) -> int:
        return self.W1.shape[1]

    @property
    def score_dim(self) -> int:
        return HIDDEN + 1

    def hidden(self, X: np.ndarray) -> np.ndarray:
        return np.maximum(np.asarray(X, float) @ self.W1.T + self.b1, 0.0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.hidden(X) @ self.w + self.b

    def scores(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Per-observation gradient of the penalized log-likelihood with
        respect to (w, b): ((y-g)/sigma2)*[relu(W1 x + b1); 1] -
        (gamma/n_train)*[w; b]."""
        A = self.hidden(X)
        resid = (np.asarray(y, float) - (A @ self.w + self.b)) / self.sigma2
        theta = np.concatenate([self.w, [self.b]])
        return (np.hstack([resid[:, None] * A, resid[:, None]])
                - (self.gamma / self.n_train) * theta)

    def to_dict(self) -> dict:
        return {"kind": "mlp", "W1": self.W1.tolist(), "b1": self.b1.tolist(),
                "w": self.w.tolist(), "b": self.b, "gamma": self.gamma,
                "sigma2": self.sigma2, "n_train": self.n_train,
                "converged": self.converged, "grad_norm": self.grad_norm}

    @classmethod
    def from_dict(cls, d: dict) -> "FittedMLP":
        return cls(W1=np.asarray(d["W1"], float), b1=np.asarray(d["b1"], float),
                   w=np.asarray(d["w"], float), b=float(d["b"]),
                   gamma=float(d["gamma"]), sigma2=float(d["sigma2"]),
                   n_train=int(d["n_train"]), converged=bool(d["converged"]),
                   grad_norm=float(d["grad_norm"]))


def _init_params(X: np.ndarray, y: np.ndarray, gamma: float,
                 seed: int, restart: int):
    rng = substream(seed, "init", restart)
    p = X.shape[1]
    W1 = rng.normal(0.0, math.sqrt(2.0 / p), size=(HIDDEN, p))
    b1 = np.full(HIDDEN, 0.1)          # small positive: units start alive
    # The output layer starts at its exact penalized least-squares optimum
    # for these random hidden features, so descent only has to shape the
    # hidden layer. Random output weights tend to settle in shallow basins
    # well above the noise floor.
    F = np.column_stack([np.maximum(X @ W1.T + b1, 0.0),
                         np.ones(X.shape[0])])
    G = F.T @ F + gamma * np.eye(HIDDEN + 1)
    try:
        wb = np.linalg.solve(G, F.T @ y)
    except np.linalg.LinAlgError:
        wb = np.linalg.lstsq(F, y, rcond=None)[0]
    return W1, b1, wb[:HIDDEN], float(wb[HIDDEN])


def _descend(X, y, gamma, params, epochs, lr):
    """Run `epochs` full-batch GD steps; returns params + last grad norm."""
    W1, b1, w, b = params
    n = X.shape[0]
    reg = 2.0 * gamma / n
    c = 2.0 / n
    grad_norm = math.inf
    for _ in range(epochs):
        pre = X @ W1.T + b1
        A = np.maximum(pre, 0.0)
        r = A @ w + b - y
        gw = c * (A.T @ r) + reg * w
        gb = c * r.sum() + reg * b
        gpre = (c * r)[:, None] * w[None, :] * (pre > 0)
        gW1 = gpre.T @ X + reg * W1
        gb1 = gpre.sum(axis=0) + reg * b1
        W1 -= lr * gW1
        b1 -= lr * gb1
        w -= lr * gw
        b -= lr * gb
        if not (math.isfinite(b) and np.isfinite(w).all()):
            raise InputError(
                "training diverged (non-finite parameters); lower step_size")
        grad_norm = math.sqrt(float(np.sum(gW1 ** 2) + np.sum(gb1 ** 2)
                                    + np.sum(gw ** 2)) + gb ** 2)
    return (W1, b1, w, b), grad_norm


def _penalized_loss(X, y, gamma, params) -> float:
    W1, b1, w, b = params
    r = y - (np.maximum(X @ W1.T + b1, 0.0) @ w + b)
    n = X.shape[0]
    pen = float(np.sum(W1 ** 2) + np.sum(b1 ** 2) + np.sum(w ** 2) + b ** 2)
    return float(np.mean(r ** 2)) + gamma / n * pen


def fit_mlp(data: Dataset, gamma: float, train_cfg: TrainConfig = TrainConfig(),
            init: FittedMLP | None = None) -> FittedMLP:
    """Full-batch gradient descent; deterministic given the config seed.

    init warm-starts from an existing fit (used for bootstrap refits)
    and runs a single descent; cold fits scout `restarts` seeded inits
    and spend the remaining epochs on the best one.
    """
    if not np.isfinite(gamma) or gamma < 0:
        raise InputError(f"gamma must be a finite value >= 0, got {gamma}")
    cfg = train_cfg
    X, y = data.X, data.y
    n, p = X.shape
    if init is not None:
        if init.p != p:
            raise InputError(f"warm start has p={init.p}, data has p={p}")
        params = (init.W1.copy(), init.b1.copy(), init.w.copy(), init.b)
        params, grad_norm = _descend(X, y, gamma, params, cfg.epochs,
                                     cfg.step_size)
    else:
        scout = min(cfg.scout_epochs, cfg.epochs) if cfg.restarts > 1 else 0
        cands = []
        for rst in range(cfg.restarts):
            cand = _init_params(X, y, gamma, cfg.seed, rst)
            gn = math.inf
            if scout:
                cand, gn = _descend(X, y, gamma, cand, scout, cfg.step_size)
            cands.append((_penalized_loss(X, y, gamma, cand), rst, cand, gn))
            if cfg.restarts == 1:
                break
        _, _, params, grad_norm = min(cands, key=lambda t: t[0])
        if cfg.epochs > scout:
            params, grad_norm = _descend(X, y, gamma, params,
                                         cfg.epochs - scout, cfg.step_size)
    W1, b1, w, b = params

    converged = grad_norm <= cfg.grad_tol
    if not converged:
        warnings.warn(f"final gradient norm {grad_norm:.3g} exceeds "
                      f"threshold {cfg.grad_tol:g}", FitWarning)
    resid = y - (np.maximum(X @ W1.T + b1, 0.0) @ w + b)
    # Floored so scores stay finite even on an exactly-interpolated fit.
    sigma2 = max(float(np.mean(resid ** 2)), float(np.finfo(np.float64).tiny))
    return FittedMLP(W1=W1, b1=b1, w=w, b=float(b), gamma=float(gamma),
                     sigma2=sigma2, n_train=n, converged=converged,
                     grad_norm=grad_norm)


def score_mlp(model: FittedMLP, x, y) -> np.ndarray:
    """Score vector of one observation, always length 5."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.size != model.p:
        raise InputError(f"predictor row has {x.size} entries, model expects {model.p}")
    if not (np.isfinite(x).all() and np.isfinite(y)):
        raise InputError("score inputs must be finite")
    return model.scores(x[None, :], np.asarray([y], float))[0]


def cv_r2(data: Dataset, gamma: float, train_cfg: TrainConfig,
          folds: int = 5, seed: int = 0) -> float:
    """Pooled k-fold cross-validated R^2 with shuffled fold assignment."""
    if folds < 2 or folds > data.n:
        raise InputError(f"folds must be in [2, n], got {folds}")
    order = substream(seed, "cv").permutation(data.n)
    pred = np.empty(data.n)
    for f in range(folds):
        held = order[f::folds]
        rest = np.setdiff1d(order, held)
        cfg = replace(train_cfg, seed=train_cfg.seed + f + 1)
        model = fit_mlp(data.subset(rest), gamma, cfg)
        pred[held] = model.predict(data.X[held])
    ss_res = float(np.sum((data.y - pred) ** 2))
    ss_tot = float(np.sum((data.y - data.y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot
