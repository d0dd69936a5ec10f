"""Nested bootstrap calibration of the time-varying control limit.

The outer loop resamples the training data with replacement, refits the
model with the same hyperparameters, and collects the out-of-bag (OOB)
score vectors. Each inner replicate then simulates a monitoring stream
by drawing i.i.d. from the OOB scores, running the MEWMA, and computing
T² against the outer resample's moments, with the MEWMA divided by
sqrt(k(lambda, i, n)) first. The pooled T values' upper-alpha quantile,
per observation index i, is the control limit CL_i.

The inflation factor

    k(lam, i, n) = [a_i + (3.72/n) w_i] / [a_i + (1/n) w_i],
    a_i = (lam/(2-lam)) (1-(1-lam)^{2i}),  w_i = (1-(1-lam)^i)^2,

accounts for the inner streams seeing OOB spread around the resample
mean rather than around the truth; 3.72/n comes from the fixed
0.632/0.368 bootstrap split. k starts just above 1 and increases to its
i -> infinity limit, and dividing z by sqrt(k) is what keeps the
calibrated limits from being conservatively inflated (the "naive"
variant skips the division; see the with_naive flag).

Randomness is addressed, never sequential: outer replicate b draws from
substream (seed, "outer", b, attempt) and inner stream (b, j) from
(seed, "inner", b, j), so results are bit-identical regardless of
worker count or execution order.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter

from .dataset import Dataset
from .errors import (CalibrationError, DriftguardError, InputError,
                     QuantileWarning)
from .linmodel import FittedLinearModel, fit_ridge
from .mewma import ScoreMoments, estimate_moments, moments_from, t2
from .nnmodel import FittedMLP, TrainConfig, fit_mlp
from .rng import substream

log = logging.getLogger(__name__)

ARTIFACT_VERSION = "driftguard-cal/1"
OOB_REDRAW_CAP = 1000


@dataclass(frozen=True)
class BootstrapConfig:
    """Knobs of the nested bootstrap. Defaults are the full protocol."""

    b_outer: int = 100
    b_inner: int = 200
    lam: float = 0.01
    alpha: float = 0.001
    horizon: int = 1000
    epsilon: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.b_outer < 1 or self.b_inner < 1:
            raise InputError("replicate counts must be >= 1")
        if not 0.0 < self.lam < 1.0:
            raise InputError(f"lambda must be in (0,1), got {self.lam}")
        if not 0.0 < self.alpha < 0.5:
            raise InputError(f"alpha must be in (0, 0.5), got {self.alpha}")
        if self.horizon < 1:
            raise InputError("horizon must be >= 1")
        if self.epsilon is not None and self.epsilon < 0:
            raise InputError("epsilon must be >= 0")
        if self.b_outer * self.b_inner * self.alpha < 20:
            warnings.warn(
                f"only {self.b_outer * self.b_inner} pooled streams for the "
                f"upper-{self.alpha:g} quantile; expect a noisy CL",
                QuantileWarning, stacklevel=2)


def inflation_factor(lam: float, i: int, n: int) -> float:
    """k(lam, i, n); i is the 1-based observation index.

    With q = 1-lam, a = (lam/(2-lam))(1-q^{2i}) and w = (1-q^i)^2, the
    raw form (a + 3.72 w/n)/(a + w/n) reduces to 1 + 2.72/(n(a/w) + 1)
    with a/w = (lam/(2-lam))(1+q^i)/(1-q^i). Evaluating through expm1
    avoids cancellation and keeps the float curve weakly increasing all
    the way to exact saturation at the i->inf limit.
    """
    if not 0.0 < lam < 1.0:
        raise InputError(f"lambda must be in (0,1), got {lam}")
    if i < 1 or n < 1:
        raise InputError("i and n must be >= 1")
    em = math.expm1(i * math.log1p(-lam))        # q^i - 1, in (-1, 0)
    a_over_w = lam / (2.0 - lam) * (2.0 + em) / -em
    return 1.0 + 2.72 / (n * a_over_w + 1.0)


def inflation_curve(lam: float, horizon: int, n: int) -> np.ndarray:
    """k(lam, i, n) for i = 1..horizon."""
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    if not 0.0 < lam < 1.0:
        raise InputError(f"lambda must be in (0,1), got {lam}")
    if n < 1:
        raise InputError("n must be >= 1")
    i = np.arange(1, horizon + 1, dtype=np.float64)
    em = np.expm1(i * math.log1p(-lam))
    a_over_w = lam / (2.0 - lam) * (2.0 + em) / -em
    return 1.0 + 2.72 / (n * a_over_w + 1.0)


def _ceil_index(n_values: int, alpha: float) -> int:
    """1-based index ceil((1-alpha)*N), via N - floor(alpha*N); the small
    guard keeps decimal alphas from straddling an exact integer."""
    return n_values - int(math.floor(alpha * n_values + 1e-12))


def quantile_upper(values, alpha: float) -> float:
    """Upper-alpha empirical quantile: ascending order statistic at
    1-based index ceil((1-alpha)*N). No interpolation."""
    arr = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if arr.size == 0:
        raise InputError("quantile of an empty collection")
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must be in (0,1), got {alpha}")
    return float(arr[_ceil_index(arr.size, alpha) - 1])


def draw_outer(data: Dataset, rng: np.random.Generator):
    """One with-replacement resample of size n plus the never-drawn
    (out-of-bag) indices, sorted ascending. May return an empty OOB set;
    callers that need one redraw (see calibrate)."""
    n = data.n
    idx = rng.integers(0, n, size=n)
    hit = np.zeros(n, dtype=bool)
    hit[idx] = True
    oob = np.flatnonzero(~hit)
    return data.subset(idx), oob


def draw_outer_nonempty(data: Dataset, seed: int, b: int,
                        max_attempts: int = OOB_REDRAW_CAP):
    """Redraw replicate b until its OOB set is nonempty, walking attempt
    substreams (seed, "outer", b, attempt)."""
    for attempt in range(max_attempts):
        resample, oob = draw_outer(data, substream(seed, "outer", b, attempt))
        if oob.size:
            if attempt:
                log.info("outer replicate %d: %d redraw(s) after empty OOB",
                         b, attempt)
            return resample, oob
        log.warning("outer replicate %d attempt %d: empty OOB, redrawing",
                    b, attempt)
    raise CalibrationError(
        f"outer replicate {b}: OOB still empty after {max_attempts} draws")


def inner_t_curve(oob_scores, outer_moments: ScoreMoments,
                  config: BootstrapConfig, k_curve, rng: np.random.Generator
                  ) -> np.ndarray:
    """T_1..T_M of one inner stream: draw scores i.i.d.-with-replacement
    from the OOB set, run the MEWMA from z=0, and take T² with shrink
    sqrt(k_i). Reference implementation; calibrate computes the same
    values batched."""
    S = np.asarray(oob_scores, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] < 1:
        raise InputError("oob_scores must be a nonempty collection of vectors")
    k = np.asarray(k_curve, dtype=np.float64)
    if k.size < config.horizon:
        raise InputError("k_curve shorter than the horizon")
    idx = rng.integers(0, S.shape[0], size=config.horizon)
    z = np.zeros(S.shape[1])
    out = np.empty(config.horizon)
    for i in range(config.horizon):
        z = config.lam * S[idx[i]] + (1.0 - config.lam) * z
        out[i] = t2(z, outer_moments, shrink=math.sqrt(k[i]))
    return out


@dataclass(frozen=True)
class Calibration:
    """Everything monitoring needs: the fitted model, the full-training
    score moments, and the control-limit curve. For i beyond the curve
    the last CL is reused (both k and the MEWMA covariance have
    converged by then). The split-sample baseline stores a single
    constant CL and no k curve."""

    method: str                    # nested-bootstrap[-naive] | split-baseline
    model: FittedLinearModel | FittedMLP
    moments: ScoreMoments
    lam: float
    alpha: float
    cl: np.ndarray
    k_curve: np.ndarray | None = None
    seed: int | None = None
    b_outer: int | None = None
    b_inner: int | None = None
    cl_naive: np.ndarray | None = None
    split_fraction: float | None = None

    def __post_init__(self):
        cl = np.asarray(self.cl, dtype=np.float64)
        if cl.ndim != 1 or cl.size < 1 or not np.isfinite(cl).all():
            raise InputError("cl must be a finite vector")
        if cl.min() < 0 or (self.method != "split-baseline" and cl.min() <= 0):
            raise InputError("control limits must be positive")
        object.__setattr__(self, "cl", cl)
        if self.k_curve is not None:
            k = np.asarray(self.k_curve, dtype=np.float64)
            if np.any(k <= 1.0) or np.any(k > 3.72):
                raise InputError("k curve must lie in (1, 3.72]")
            object.__setattr__(self, "k_curve", k)

    @property
    def model_kind(self) -> str:
        return "mlp" if isinstance(self.model, FittedMLP) else "ridge"

    @property
    def horizon(self) -> int:
        return self.cl.size

    def cl_at(self, i: int) -> float:
        """CL for 1-based monitoring index i; constant beyond the curve."""
        if i < 1:
            raise InputError("monitoring index starts at 1")
        return float(self.cl[min(i, self.cl.size) - 1])

    def to_json_dict(self) -> dict:
        d = self.moments.dim
        out = {
            "version": ARTIFACT_VERSION,
            "method": self.method,
            "model": self.model.to_dict(),
            "gamma": self.model.gamma,
            "epsilon": self.moments.epsilon,
            "lambda": self.lam,
            "alpha": self.alpha,
            "horizon": int(self.cl.size),
            "seed": self.seed,
            "score_mean": self.moments.mean.tolist(),
            "score_cov": {"dim": d, "data": self.moments.cov.ravel().tolist()},
            "cl": self.cl.tolist(),
            "k": None if self.k_curve is None else self.k_curve.tolist(),
        }
        if self.b_outer is not None:
            out["b_outer"] = self.b_outer
            out["b_inner"] = self.b_inner
        if self.cl_naive is not None:
            out["cl_naive"] = self.cl_naive.tolist()
        if self.split_fraction is not None:
            out["split_fraction"] = self.split_fraction
        return out

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Calibration":
        version = doc.get("version")
        if version != ARTIFACT_VERSION:
            raise InputError(f"unknown calibration artifact version {version!r}; "
                             f"expected {ARTIFACT_VERSION!r}")
        kind = doc["model"].get("kind")
        if kind == "ridge":
            model = FittedLinearModel.from_dict(doc["model"])
        elif kind == "mlp":
            model = FittedMLP.from_dict(doc["model"])
        else:
            raise InputError(f"unknown model kind {kind!r}")
        d = int(doc["score_cov"]["dim"])
        cov = np.asarray(doc["score_cov"]["data"], dtype=np.float64).reshape(d, d)
        moments = moments_from(doc["score_mean"], cov, float(doc["epsilon"]))
        k = doc.get("k")
        naive = doc.get("cl_naive")
        return cls(method=doc["method"], model=model, moments=moments,
                   lam=float(doc["lambda"]), alpha=float(doc["alpha"]),
                   cl=np.asarray(doc["cl"], dtype=np.float64),
                   k_curve=None if k is None else np.asarray(k, dtype=np.float64),
                   seed=doc.get("seed"),
                   b_outer=doc.get("b_outer"), b_inner=doc.get("b_inner"),
                   cl_naive=None if naive is None else np.asarray(naive, float),
                   split_fraction=doc.get("split_fraction"))

    @classmethod
    def load(cls, path) -> "Calibration":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError as exc:
            raise InputError(f"no such calibration file: {path}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"could not parse {path}: {exc}") from exc
        return cls.from_json_dict(doc)


def _fit_model(model_kind: str, data: Dataset, gamma: float,
               train_cfg: TrainConfig | None, init: FittedMLP | None = None):
    if model_kind == "ridge":
        return fit_ridge(data, gamma)
    if model_kind == "mlp":
        return fit_mlp(data, gamma, train_cfg or TrainConfig(), init=init)
    raise InputError(f"model_kind must be 'ridge' or 'mlp', got {model_kind!r}")


def _outer_block(data: Dataset, model_kind: str, gamma: float,
                 config: BootstrapConfig, train_cfg: TrainConfig | None,
                 warm: FittedMLP | None, eps: float, shrink: np.ndarray,
                 b: int, with_naive: bool):
    """T² values of all inner streams of outer replicate b:
    (b_inner, horizon) block, plus the naive (shrink-free) block."""
    resample, oob = draw_outer_nonempty(data, config.seed, b)
    try:
        if model_kind == "mlp":
            cfg = replace(train_cfg or TrainConfig(),
                          epochs=(train_cfg or TrainConfig()).refit_epochs)
            refit = _fit_model(model_kind, resample, gamma, cfg, init=warm)
        else:
            refit = _fit_model(model_kind, resample, gamma, train_cfg)
        moments_b = estimate_moments(refit.scores(resample.X, resample.y),
                                     epsilon=eps)
    except DriftguardError as exc:
        raise type(exc)(f"outer replicate {b}: {exc}") from exc
    s_oob = refit.scores(data.X[oob], data.y[oob])

    m = oob.size
    M = config.horizon
    idx = np.empty((config.b_inner, M), dtype=np.intp)
    for j in range(config.b_inner):
        idx[j] = substream(config.seed, "inner", b, j).integers(0, m, size=M)
    streams = s_oob[idx]                                    # (B_I, M, d)
    zs = lfilter([config.lam], [1.0, -(1.0 - config.lam)], streams, axis=1)
    diff = zs / shrink[None, :, None] - moments_b.mean
    block = np.einsum("jmd,de,jme->jm", diff, moments_b.precision, diff)
    block = np.maximum(block, 0.0)
    block_naive = None
    if with_naive:
        diff = zs - moments_b.mean
        block_naive = np.einsum("jmd,de,jme->jm", diff, moments_b.precision,
                                diff)
        block_naive = np.maximum(block_naive, 0.0)
    return block, block_naive


def _columnwise_quantile_upper(T: np.ndarray, alpha: float) -> np.ndarray:
    pos = _ceil_index(T.shape[0], alpha) - 1
    return np.partition(T, pos, axis=0)[pos]


def calibrate(data: Dataset, model_kind: str, gamma: float,
              config: BootstrapConfig, train_cfg: TrainConfig | None = None,
              with_naive: bool = False, workers: int = 1) -> Calibration:
    """Full nested-bootstrap calibration; bit-identical for a given seed
    regardless of workers. with_naive also pools T² without the sqrt(k)
    division and stores that CL curve alongside (the draws are shared,
    so naive and corrected are the identical-seed comparison)."""
    if data.n < 30:
        raise InputError(f"refusing to calibrate on n={data.n} < 30 "
                         "(out-of-bag resampling degenerates)")
    model = _fit_model(model_kind, data, gamma, train_cfg)
    s_full = model.scores(data.X, data.y)
    moments = estimate_moments(s_full, epsilon=config.epsilon)
    eps = moments.epsilon
    k_curve = inflation_curve(config.lam, config.horizon, data.n)
    shrink = np.sqrt(k_curve)

    warm = model if model_kind == "mlp" else None
    bi, M = config.b_inner, config.horizon
    T = np.empty((config.b_outer * bi, M))
    Tn = np.empty_like(T) if with_naive else None

    def keep(b, block, block_naive):
        T[b * bi:(b + 1) * bi] = block
        if with_naive:
            Tn[b * bi:(b + 1) * bi] = block_naive

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_outer_block, data, model_kind, gamma,
                                   config, train_cfg, warm, eps, shrink, b,
                                   with_naive)
                       for b in range(config.b_outer)]
            for b, fut in enumerate(futures):
                keep(b, *fut.result())
    else:
        for b in range(config.b_outer):
            keep(b, *_outer_block(data, model_kind, gamma, config, train_cfg,
                                  warm, eps, shrink, b, with_naive))

    cl = _columnwise_quantile_upper(T, config.alpha)
    cl_naive = (_columnwise_quantile_upper(Tn, config.alpha)
                if with_naive else None)
    return Calibration(method="nested-bootstrap", model=model,
                       moments=moments, lam=config.lam, alpha=config.alpha,
                       cl=cl, k_curve=k_curve, seed=config.seed,
                       b_outer=config.b_outer, b_inner=config.b_inner,
                       cl_naive=cl_naive)


@dataclass(frozen=True)
class BaselineSplit:
    """Split-sample comparison: model fit on the first part of training,
    constant CL from the MEWMA T² quantile over the second part."""

    model: FittedLinearModel | FittedMLP
    moments: ScoreMoments
    cl: float
    lam: float
    alpha: float
    split_fraction: float

    def to_calibration(self) -> Calibration:
        return Calibration(method="split-baseline", model=self.model,
                           moments=self.moments, lam=self.lam,
                           alpha=self.alpha, cl=np.array([self.cl]),
                           split_fraction=self.split_fraction)


def baseline_split_cl(data: Dataset, split_fraction: float, gamma: float,
                      lam: float, alpha: float, epsilon: float | None = None,
                      model_kind: str = "ridge",
                      train_cfg: TrainConfig | None = None) -> BaselineSplit:
    """Fit on the first floor(split_fraction*n) rows, run the MEWMA from
    z=0 over the remaining rows' scores, and take the constant upper-alpha
    quantile of those T² values."""
    if not 0.0 < split_fraction < 1.0:
        raise InputError(f"split_fraction must be in (0,1), got {split_fraction}")
    if not 0.0 < lam < 1.0:
        raise InputError(f"lambda must be in (0,1), got {lam}")
    if not 0.0 < alpha < 0.5:
        raise InputError(f"alpha must be in (0, 0.5), got {alpha}")
    n1 = int(math.floor(split_fraction * data.n))
    n2 = data.n - n1
    if n1 < 30 or n2 < 30:
        raise InputError(f"both splits need >= 30 points, got {n1} and {n2}")
    if n2 <= 1.0 / alpha + 1e-9:
        warnings.warn(
            f"only {n2} held-out points for the upper-{alpha:g} quantile; "
            "the baseline CL is unreliable at this alpha", QuantileWarning,
            stacklevel=2)
    model = _fit_model(model_kind, data.subset(np.arange(n1)), gamma, train_cfg)
    s2 = model.scores(data.X[n1:], data.y[n1:])
    moments = estimate_moments(s2, epsilon=epsilon)
    zs = lfilter([lam], [1.0, -(1.0 - lam)], s2, axis=0)
    diff = zs - moments.mean
    tvals = np.maximum(
        np.einsum("id,de,ie->i", diff, moments.precision, diff), 0.0)
    return BaselineSplit(model=model, moments=moments,
                         cl=quantile_upper(tvals, alpha), lam=lam, alpha=alpha,
                         split_fraction=split_fraction)
