"""Live monitoring: score each new observation, update the MEWMA, and
compare T² against the calibrated control limit (shrink = 1)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .bootstrap import Calibration
from .dataset import Dataset
from .errors import InputError


@dataclass(frozen=True)
class MonitorRecord:
    i: int          # 1-based observation index since monitoring start
    t2: float
    cl: float
    signal: bool    # t2 > cl


def monitor_stream(calibration: Calibration, stream: Dataset) -> list[MonitorRecord]:
    """One record per stream observation, in order."""
    model = calibration.model
    expect = model.p
    if stream.p != expect:
        raise InputError(f"stream has {stream.p} predictors, the calibrated "
                         f"model expects {expect}")
    scores = model.scores(stream.X, stream.y)
    lam = calibration.lam
    zs = lfilter([lam], [1.0, -(1.0 - lam)], scores, axis=0)
    diff = zs - calibration.moments.mean
    tvals = np.maximum(
        np.einsum("id,de,ie->i", diff, calibration.moments.precision, diff),
        0.0)
    cls_ = np.array([calibration.cl_at(i) for i in range(1, stream.n + 1)])
    return [MonitorRecord(i=i + 1, t2=float(tvals[i]), cl=float(cls_[i]),
                          signal=bool(tvals[i] > cls_[i]))
            for i in range(stream.n)]


def first_signal(records: list[MonitorRecord]) -> int | None:
    """1-based index of the first signal, or None."""
    for rec in records:
        if rec.signal:
            return rec.i
    return None


def signals_vector(records: list[MonitorRecord]) -> np.ndarray:
    return np.array([rec.signal for rec in records], dtype=bool)


def records_to_csv(records: list[MonitorRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,t2,cl,signal\n")
        for rec in records:
            fh.write(f"{rec.i},{rec.t2:.17g},{rec.cl:.17g},{int(rec.signal)}\n")
