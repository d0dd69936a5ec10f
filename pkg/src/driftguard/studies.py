"""The two simulation studies, desk scale by default.

False-alarm study: per replicate, generate fresh training data, run the
full nested-bootstrap calibration, then monitor a fresh no-shift stream
and record pointwise signals. Arms: the bootstrap CL, the split-sample
baseline CL, and optionally the naive (no sqrt(k) division) CL computed
from the identical bootstrap draws.

Detection study: same calibration protocol, but the stream switches to
the drifted regime at shift_at (mixture response for the linear setup, a
mid-trajectory parameter switch for the oscillator), recording the first
signal per replicate. A no-shift control stream is monitored alongside.

Per-replicate seeds are derived substreams of the study seed, so any
subset of replicates can be rerun bit-identically and replicate order
never matters.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .bootstrap import BootstrapConfig, Calibration, baseline_split_cl, calibrate
from .dataset import Dataset
from .datagen import (TRAIN_OSC_PARAMS, DEFAULT_STATE0, T_END, continue_stream,
                      gen_linear, gen_oscillator, shifted_osc_params)
from .errors import InputError
from .monitor import first_signal, monitor_stream, signals_vector
from .nnmodel import TrainConfig, cv_r2
from .rng import subseed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StudyConfig:
    generator: str = "linear"            # linear | oscillator
    replicates: int = 20
    seed: int = 0
    gamma: float = 0.1
    n_train: int = 2000
    stream_len: int = 1000
    shift_at: int = 201                  # first drifted observation index
    sigma: float = 0.03                 # oscillator noise sd
    split_fraction: float = 0.5
    include_baseline: bool = True
    include_naive: bool = False
    with_control: bool = True           # detect study: extra no-shift stream
    with_cv: bool = True                # mlp only: record 5-fold CV R^2
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    train_cfg: TrainConfig | None = None
    workers: int = 1

    def __post_init__(self):
        if self.generator not in ("linear", "oscillator"):
            raise InputError(f"generator must be 'linear' or 'oscillator', "
                             f"got {self.generator!r}")
        if self.replicates < 1:
            raise InputError("replicates must be >= 1")
        if self.stream_len < 2:
            raise InputError("stream_len must be >= 2")
        if not 1 < self.shift_at <= self.stream_len:
            raise InputError("shift_at must lie within the stream")


@dataclass
class StudyResult:
    far_curve: dict[str, np.ndarray]          # arm -> pointwise signal rate
    detect_times: dict[str, list[int | None]]  # arm -> first signal per rep
    meta: dict

    def arms(self) -> list[str]:
        return list(self.far_curve.keys())


def _model_kind(cfg: StudyConfig) -> str:
    return "ridge" if cfg.generator == "linear" else "mlp"


def _train_data(cfg: StudyConfig, r: int) -> Dataset:
    data_seed = subseed(cfg.seed, "rep", r, "train")
    if cfg.generator == "linear":
        return gen_linear(cfg.n_train, "single", data_seed)
    return gen_oscillator(TRAIN_OSC_PARAMS, cfg.n_train, cfg.sigma,
                          DEFAULT_STATE0, data_seed)


def _stream_data(cfg: StudyConfig, r: int, train: Dataset, shifted: bool,
                 name: str) -> Dataset:
    seed = subseed(cfg.seed, "rep", r, name)
    n_pre = cfg.shift_at - 1 if shifted else cfg.stream_len
    n_post = cfg.stream_len - n_pre
    if cfg.generator == "linear":
        pre = gen_linear(n_pre, "single", subseed(seed, "pre"))
        if n_post == 0:
            return pre
        post = gen_linear(n_post, "mixture", subseed(seed, "post"))
        return Dataset(np.vstack([pre.X, post.X]),
                       np.concatenate([pre.y, post.y]))
    # The oscillator stream continues the trajectory past the training
    # window, starting from the training end state. By then the damping
    # has settled the masses near the displaced equilibrium the coupling
    # spring creates, where the energy response is still well inside the
    # training range. The shift switches the ODE parameters mid-trajectory
    # with the state carried over (a regime change, not a restart); the
    # new parameters move the equilibrium energy itself, so the shift
    # stays observable even after the transient has decayed.
    params = TRAIN_OSC_PARAMS
    dt = T_END / (cfg.n_train - 1)
    return continue_stream(params, shifted_osc_params(params), n_pre, n_post,
                           train.X[-1], dt, cfg.sigma, seed)


def _replicate_arms(cfg: StudyConfig, r: int, shifted: bool) -> dict:
    """Calibrate on fresh training data and monitor the requested arms.
    Returns signal vectors and first-signal indices keyed by arm."""
    t0 = time.perf_counter()
    train = _train_data(cfg, r)
    kind = _model_kind(cfg)
    cal_cfg = replace(cfg.bootstrap, seed=subseed(cfg.seed, "rep", r, "cal"))
    cal = calibrate(train, kind, cfg.gamma, cal_cfg, train_cfg=cfg.train_cfg,
                    with_naive=cfg.include_naive)
    stream = _stream_data(cfg, r, train, shifted, "stream")

    arms: dict[str, dict] = {}

    def run(name: str, calibration: Calibration, data: Dataset):
        recs = monitor_stream(calibration, data)
        arms[name] = {"signals": signals_vector(recs),
                      "first": first_signal(recs)}

    run("bootstrap", cal, stream)
    if cfg.include_naive:
        naive = replace(cal, method="nested-bootstrap-naive", cl=cal.cl_naive,
                        cl_naive=None)
        run("naive", naive, stream)
    if cfg.include_baseline:
        base = baseline_split_cl(train, cfg.split_fraction, cfg.gamma,
                                 cfg.bootstrap.lam, cfg.bootstrap.alpha,
                                 epsilon=cfg.bootstrap.epsilon,
                                 model_kind=kind, train_cfg=cfg.train_cfg)
        run("baseline", base.to_calibration(), stream)
    if shifted and cfg.with_control:
        control = _stream_data(cfg, r, train, False, "control-stream")
        run("control", cal, control)
    extra = {}
    if kind == "mlp" and cfg.with_cv:
        extra["cv_r2"] = cv_r2(train, cfg.gamma,
                               cfg.train_cfg or TrainConfig(),
                               seed=subseed(cfg.seed, "rep", r, "cv"))
    log.info("replicate %d done in %.1fs", r, time.perf_counter() - t0)
    return {"arms": arms, "extra": extra}


def _collect(cfg: StudyConfig, shifted: bool) -> StudyResult:
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_replicate_arms, cfg, r, shifted)
                       for r in range(cfg.replicates)]
            reps = [f.result() for f in futures]
    else:
        reps = [_replicate_arms(cfg, r, shifted) for r in range(cfg.replicates)]

    arm_names = list(reps[0]["arms"].keys())
    far_curve = {}
    detect_times = {}
    for name in arm_names:
        signals = np.stack([rep["arms"][name]["signals"] for rep in reps])
        far_curve[name] = signals.mean(axis=0)
        detect_times[name] = [rep["arms"][name]["first"] for rep in reps]
    meta = {
        "config": asdict(cfg),
        "shifted": shifted,
        "mean_far": {name: float(far_curve[name].mean()) for name in arm_names},
    }
    if shifted:
        pre = cfg.shift_at - 1
        meta["pre_shift_signal_fraction"] = {
            name: float(np.mean([
                bool(rep["arms"][name]["signals"][:pre].any()) for rep in reps]))
            for name in arm_names}
        meta["median_first_signal"] = {
            name: _median_detect(detect_times[name]) for name in arm_names}
    cv_vals = [rep["extra"]["cv_r2"] for rep in reps if "cv_r2" in rep["extra"]]
    if cv_vals:
        meta["cv_r2"] = [float(v) for v in cv_vals]
    return StudyResult(far_curve=far_curve, detect_times=detect_times, meta=meta)


def _median_detect(times: list[int | None]) -> float:
    vals = [float("inf") if t is None else float(t) for t in times]
    return float(np.median(vals))


def far_study(cfg: StudyConfig) -> StudyResult:
    """Pointwise false-alarm rates on no-shift streams."""
    return _collect(cfg, shifted=False)


def detect_study(cfg: StudyConfig) -> StudyResult:
    """First-signal indices on streams that drift at shift_at."""
    return _collect(cfg, shifted=True)


def write_far_curve_csv(result: StudyResult, path) -> None:
    arms = result.arms()
    curves = [result.far_curve[a] for a in arms]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["i"] + arms) + "\n")
        for i in range(curves[0].size):
            row = [str(i + 1)] + [f"{c[i]:.17g}" for c in curves]
            fh.write(",".join(row) + "\n")


def write_detect_times_csv(result: StudyResult, path) -> None:
    arms = list(result.detect_times.keys())
    reps = len(result.detect_times[arms[0]])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["replicate"] + arms) + "\n")
        for r in range(reps):
            row = [str(r)]
            for a in arms:
                t = result.detect_times[a][r]
                row.append("" if t is None else str(t))
            fh.write(",".join(row) + "\n")
