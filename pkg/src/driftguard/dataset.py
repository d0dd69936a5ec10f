"""Dataset container and CSV round-trip.

CSV layout is fixed: header ``x1,...,xp,y``, one observation per line,
decimal point, LF line endings. Values are written with %.17g so floats
round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class Dataset:
    """Predictor matrix X (n, p) plus response vector y (n,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2:
            raise InputError(f"X must be 2-d, got shape {X.shape}")
        if y.ndim != 1:
            raise InputError(f"y must be 1-d, got shape {y.shape}")
        if X.shape[0] != y.shape[0]:
            raise InputError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise InputError("dataset needs at least one row and one predictor")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise InputError("dataset contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.X[idx], self.y[idx])

    def to_csv(self, path) -> None:
        header = ",".join([f"x{j + 1}" for j in range(self.p)] + ["y"])
        body = np.column_stack([self.X, self.y])
        np.savetxt(path, body, fmt="%.17g", delimiter=",",
                   header=header, comments="", newline="\n")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        if not path.is_file():
            raise InputError(f"no such data file: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
        cols = header.split(",")
        if len(cols) < 2 or cols[-1] != "y" or \
                cols[:-1] != [f"x{j + 1}" for j in range(len(cols) - 1)]:
            raise InputError(f"bad CSV header {header!r}; expected x1,...,xp,y")
        try:
            body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except ValueError as exc:
            raise InputError(f"could not parse {path}: {exc}") from exc
        if body.shape[1] != len(cols):
            raise InputError(f"{path}: rows have {body.shape[1]} fields, "
                             f"header has {len(cols)}")
        return cls(body[:, :-1], body[:, -1])
