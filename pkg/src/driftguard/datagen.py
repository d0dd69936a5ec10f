"""Synthetic data generators for the two simulation studies.

Linear: x uniform on [-sqrt(3), sqrt(3)] (unit variance), response from
one line y = 16x + 5 + eps or a half/half mixture with y = 12x + 3 + eps,
eps ~ N(0, 16). The x-draws and noise come from substreams separate from
the curve choice, so the two modes share identical x for equal seeds.

Oscillator: two coupled masses with a finite-extensibility nonlinear
coupling force phi = (p1-p2)/(1+|p1-p2|), integrated with classical RK4
using internal substeps. The response is the energy expression below
plus Gaussian measurement noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .dataset import Dataset
from .errors import DivergenceError, InputError
from .rng import substream

class Line(NamedTuple):
    slope: float
    intercept: float


# y = slope*x + intercept + noise
CURVE1 = Line(16.0, 5.0)
CURVE2 = Line(12.0, 3.0)
LINEAR_NOISE_SD = 4.0
X_HALF_WIDTH = math.sqrt(3.0)


def gen_linear(n: int, mode: str, seed: int, noise_sd: float = LINEAR_NOISE_SD) -> Dataset:
    """Draw n observations in "single" (curve 1 only) or "mixture" mode.

    noise_sd is a test hook; 0 gives exact lines.
    """
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    if mode not in ("single", "mixture"):
        raise InputError(f"mode must be 'single' or 'mixture', got {mode!r}")
    x = substream(seed, "x").uniform(-X_HALF_WIDTH, X_HALF_WIDTH, size=n)
    noise = substream(seed, "noise").normal(0.0, 1.0, size=n)
    slope = np.full(n, CURVE1[0])
    intercept = np.full(n, CURVE1[1])
    if mode == "mixture":
        pick2 = substream(seed, "curve").random(n) < 0.5
        slope[pick2] = CURVE2[0]
        intercept[pick2] = CURVE2[1]
    y = slope * x + intercept + noise_sd * noise
    return Dataset(x[:, None], y)


@dataclass(frozen=True)
class OscParams:
    """Masses, spring constants, and damping of the coupled oscillator."""

    m1: float
    m2: float
    k1: float
    k2: float
    k3: float
    c1: float
    c2: float

    def __post_init__(self):
        for name in ("m1", "m2", "k1", "k2", "k3"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be > 0")
        if self.c1 < 0 or self.c2 < 0:
            raise InputError("damping coefficients must be >= 0")


@dataclass(frozen=True)
class OscState:
    """Positions/velocities of the two masses at time t."""

    p1: float
    v1: float
    p2: float
    v2: float
    t: float = 0.0

    def __post_init__(self):
        vals = (self.p1, self.v1, self.p2, self.v2, self.t)
        if not all(math.isfinite(v) for v in vals):
            raise InputError("oscillator state must be finite")

    def vector(self) -> np.ndarray:
        return np.array([self.p1, self.v1, self.p2, self.v2])


TRAIN_OSC_PARAMS = OscParams(m1=1.0, m2=2.0, k1=1.0, k2=2.0, k3=1.5, c1=0.1, c2=0.2)
DEFAULT_STATE0 = OscState(p1=1.0, v1=0.0, p2=0.0, v2=0.0, t=0.0)
T_END = 30.0
MAX_SUBSTEP = 1e-3


def shifted_osc_params(params: OscParams) -> OscParams:
    """Drift regime: masses up 10%/20%, first spring stiffened 30%."""
    return replace(params, m1=1.1 * params.m1, m2=1.2 * params.m2,
                   k1=1.3 * params.k1)


def _phi(p1: float, p2: float) -> float:
    r = p1 - p2
    return r / (1.0 + abs(r))


def _deriv(params: OscParams, p1, v1, p2, v2):
    f = params.k3 * _phi(p1, p2)
    a1 = (-params.k1 * p1 - params.c1 * v1 + f) / params.m1
    a2 = (-params.k2 * p2 - params.c2 * v2 - f) / params.m2
    return v1, a1, v2, a2


def osc_derivative(params: OscParams, state: OscState) -> np.ndarray:
    """(dp1, dv1, dp2, dv2) of the equations of motion."""
    return np.array(_deriv(params, state.p1, state.v1, state.p2, state.v2))


def _rk4_span(params: OscParams, s, dt: float, max_substep: float):
    """Advance one sample interval with RK4 substeps; s is a 4-tuple."""
    nsub = max(1, math.ceil(dt / max_substep))
    h = dt / nsub
    p1, v1, p2, v2 = s
    for _ in range(nsub):
        a = _deriv(params, p1, v1, p2, v2)
        b = _deriv(params, p1 + 0.5 * h * a[0], v1 + 0.5 * h * a[1],
                   p2 + 0.5 * h * a[2], v2 + 0.5 * h * a[3])
        c = _deriv(params, p1 + 0.5 * h * b[0], v1 + 0.5 * h * b[1],
                   p2 + 0.5 * h * b[2], v2 + 0.5 * h * b[3])
        d = _deriv(params, p1 + h * c[0], v1 + h * c[1],
                   p2 + h * c[2], v2 + h * c[3])
        p1 += (h / 6.0) * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0])
        v1 += (h / 6.0) * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1])
        p2 += (h / 6.0) * (a[2] + 2.0 * b[2] + 2.0 * c[2] + d[2])
        v2 += (h / 6.0) * (a[3] + 2.0 * b[3] + 2.0 * c[3] + d[3])
    return p1, v1, p2, v2


def _integrate_rows(params: OscParams, s0, dt: float, steps: int,
                    max_substep: float = MAX_SUBSTEP) -> np.ndarray:
    """(steps+1, 4) state rows including the initial one."""
    if not dt > 0:
        raise InputError(f"dt must be > 0, got {dt}")
    if steps < 0:
        raise InputError("steps must be >= 0")
    out = np.empty((steps + 1, 4))
    s = (float(s0[0]), float(s0[1]), float(s0[2]), float(s0[3]))
    out[0] = s
    for k in range(1, steps + 1):
        s = _rk4_span(params, s, dt, max_substep)
        if not all(math.isfinite(v) for v in s):
            raise DivergenceError(f"state became non-finite at step {k}")
        out[k] = s
    return out


def integrate(params: OscParams, state0: OscState, dt: float, steps: int,
              max_substep: float = MAX_SUBSTEP) -> list[OscState]:
    """RK4 trajectory: steps+1 states including state0."""
    rows = _integrate_rows(params, state0.vector(), dt, steps, max_substep)
    return [OscState(p1=r[0], v1=r[1], p2=r[2], v2=r[3], t=state0.t + k * dt)
            for k, r in enumerate(rows)]


def _energy_rows(params: OscParams, rows: np.ndarray) -> np.ndarray:
    p1, v1, p2, v2 = rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3]
    r = p1 - p2
    phi = r / (1.0 + np.abs(r))
    return (0.5 * (params.m1 * v1 ** 2 + params.m2 * v2 ** 2)
            + 0.5 * (params.k1 * p1 ** 2 + params.k2 * p2 ** 2)
            + params.k3 * phi)


def energy(params: OscParams, state) -> float:
    """Response variable before noise:
    KE + (k1 p1^2 + k2 p2^2)/2 + k3*phi(p1, p2)."""
    row = state.vector() if isinstance(state, OscState) else np.asarray(state, float)
    return float(_energy_rows(params, row[None, :])[0])


def mechanical_energy(params: OscParams, state) -> float:
    """Conserved energy of the undamped system (Lyapunov function of the
    damped one): the coupling force k3*phi derives from the potential
    -k3*(|r| - log(1+|r|)), not from k3*phi itself, so this differs from
    the response expression in `energy`.
    """
    row = state.vector() if isinstance(state, OscState) else np.asarray(state, float)
    p1, v1, p2, v2 = row
    r = p1 - p2
    coupling = -params.k3 * (abs(r) - math.log1p(abs(r)))
    return (0.5 * (params.m1 * v1 ** 2 + params.m2 * v2 ** 2)
            + 0.5 * (params.k1 * p1 ** 2 + params.k2 * p2 ** 2)
            + coupling)


def gen_oscillator(params: OscParams, n: int, sigma: float,
                   state0: OscState = DEFAULT_STATE0, seed: int = 0) -> Dataset:
    """Sample the trajectory uniformly on [0, 30]: X = state, y = energy
    plus N(0, sigma^2) noise."""
    if n < 2:
        raise InputError(f"n must be >= 2, got {n}")
    if sigma < 0:
        raise InputError("sigma must be >= 0")
    dt = T_END / (n - 1)
    rows = _integrate_rows(params, state0.vector(), dt, n - 1)
    y = _energy_rows(params, rows)
    if sigma > 0:
        y = y + sigma * substream(seed, "noise").normal(0.0, 1.0, size=n)
    return Dataset(rows, y)


def continue_stream(params_pre: OscParams, params_post: OscParams,
                    n_pre: int, n_post: int, state0, dt: float,
                    sigma: float, seed: int) -> Dataset:
    """Monitoring stream that continues a trajectory from state0: n_pre
    sample intervals under params_pre, then a parameter switch (not a
    restart) for n_post more. The initial state itself is not emitted."""
    start = state0.vector() if isinstance(state0, OscState) else np.asarray(
        state0, dtype=np.float64)
    pre = _integrate_rows(params_pre, start, dt, n_pre)[1:]
    last = pre[-1] if n_pre > 0 else start
    post = _integrate_rows(params_post, last, dt, n_post)[1:]
    rows = np.vstack([pre, post])
    y = np.concatenate([_energy_rows(params_pre, pre),
                        _energy_rows(params_post, post)])
    if sigma > 0:
        y = y + sigma * substream(seed, "noise").normal(0.0, 1.0, size=len(y))
    return Dataset(rows, y)
