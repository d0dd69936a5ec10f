import numpy as np
import pytest

from driftguard import (CURVE1, CURVE2, DEFAULT_STATE0, TRAIN_OSC_PARAMS,
                        DivergenceError, InputError, OscParams, OscState,
                        energy, gen_linear, gen_oscillator, integrate,
                        mechanical_energy, osc_derivative, shifted_osc_params)
from driftguard.datagen import X_HALF_WIDTH, continue_stream


# ---------------------------------------------------------------- linear

def test_noiseless_single_is_exact_line():
    data = gen_linear(500, "single", seed=3, noise_sd=0.0)
    assert np.allclose(data.y, 16.0 * data.X[:, 0] + 5.0, atol=1e-12)


def test_x_variance_is_one():
    data = gen_linear(100_000, "single", seed=1)
    assert abs(data.X[:, 0].var() - 1.0) < 0.02
    assert np.all(np.abs(data.X[:, 0]) <= X_HALF_WIDTH)


def test_mixture_fraction_is_half():
    # noiseless rows classify exactly by which curve generated them
    data = gen_linear(100_000, "mixture", seed=2, noise_sd=0.0)
    on1 = np.isclose(data.y, 16.0 * data.X[:, 0] + 5.0, atol=1e-9)
    on2 = np.isclose(data.y, 12.0 * data.X[:, 0] + 3.0, atol=1e-9)
    assert np.all(on1 | on2)
    frac = on1.mean()
    assert 0.49 <= frac <= 0.51


def test_modes_share_x_draws():
    a = gen_linear(1000, "single", seed=11)
    b = gen_linear(1000, "mixture", seed=11)
    assert np.array_equal(a.X, b.X)


def test_gen_linear_deterministic():
    a = gen_linear(100, "mixture", seed=5)
    b = gen_linear(100, "mixture", seed=5)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


def test_gen_linear_rejects_bad_mode():
    with pytest.raises(InputError):
        gen_linear(10, "both", seed=0)


def test_curve_constants():
    assert (CURVE1.slope, CURVE1.intercept) == (16.0, 5.0)
    assert (CURVE2.slope, CURVE2.intercept) == (12.0, 3.0)


# ------------------------------------------------------------ oscillator

def test_derivative_equilibrium():
    state = OscState(0.0, 0.0, 0.0, 0.0)
    assert np.array_equal(osc_derivative(TRAIN_OSC_PARAMS, state), np.zeros(4))


def test_derivative_hand_case():
    state = OscState(1.0, 0.0, 0.0, 0.0)
    d = osc_derivative(TRAIN_OSC_PARAMS, state)
    # phi = 1/(1+1) = 0.5; a1 = (-1 + 1.5*0.5)/1, a2 = -1.5*0.5/2
    assert np.array_equal(d, [0.0, -0.25, 0.0, -0.375])


def test_coupling_force_bounded_and_antisymmetric():
    params = TRAIN_OSC_PARAMS
    rng = np.random.default_rng(0)
    for _ in range(100):
        p1, p2 = rng.normal(scale=50.0, size=2)
        da = osc_derivative(params, OscState(p1, 0.0, p2, 0.0))
        db = osc_derivative(params, OscState(p2, 0.0, p1, 0.0))
        phi_a = (da[1] * params.m1 + params.k1 * p1) / params.k3
        phi_b = (db[1] * params.m1 + params.k1 * p2) / params.k3
        assert -1.0 < phi_a < 1.0
        assert np.isclose(phi_a, -phi_b, atol=1e-12)


def test_integrate_equilibrium_stays_zero():
    traj = integrate(TRAIN_OSC_PARAMS, OscState(0, 0, 0, 0), dt=0.01, steps=50)
    assert len(traj) == 51
    assert all(s.vector().max() == 0.0 for s in traj)
    assert np.isclose(traj[-1].t, 0.5)


def test_undamped_conserves_mechanical_energy():
    params = OscParams(m1=1.0, m2=2.0, k1=1.0, k2=2.0, k3=1.5, c1=0.0, c2=0.0)
    traj = integrate(params, DEFAULT_STATE0, dt=30.0 / 2999, steps=2999)
    e = np.array([mechanical_energy(params, s) for s in traj])
    assert np.max(np.abs(e - e[0])) <= 1e-6 * abs(e[0])


def test_substep_halving_converges():
    traj_a = integrate(TRAIN_OSC_PARAMS, DEFAULT_STATE0, dt=0.01, steps=300,
                       max_substep=1e-3)
    traj_b = integrate(TRAIN_OSC_PARAMS, DEFAULT_STATE0, dt=0.01, steps=300,
                       max_substep=5e-4)
    diff = np.abs(traj_a[-1].vector() - traj_b[-1].vector()).max()
    assert diff <= 1e-8


def test_energy_hand_cases():
    assert energy(TRAIN_OSC_PARAMS, OscState(0, 0, 0, 0)) == 0.0
    assert np.isclose(energy(TRAIN_OSC_PARAMS, OscState(1.0, 0.0, 0.0, 0.0)),
                      1.25, atol=1e-15)


def test_energy_lower_bound():
    rng = np.random.default_rng(7)
    for _ in range(200):
        s = OscState(*rng.normal(scale=5.0, size=4))
        assert energy(TRAIN_OSC_PARAMS, s) >= -TRAIN_OSC_PARAMS.k3


def test_damped_energy_nonincreasing():
    traj = integrate(TRAIN_OSC_PARAMS, DEFAULT_STATE0, dt=0.01, steps=3000)
    e = np.array([mechanical_energy(TRAIN_OSC_PARAMS, s) for s in traj])
    assert np.all(np.diff(e) <= 1e-12)


def test_gen_oscillator_noiseless_y_recomputable():
    data = gen_oscillator(TRAIN_OSC_PARAMS, 200, 0.0, DEFAULT_STATE0, seed=4)
    y_again = np.array([energy(TRAIN_OSC_PARAMS, OscState(*row))
                        for row in data.X])
    assert np.array_equal(data.y, y_again)


def test_gen_oscillator_deterministic():
    a = gen_oscillator(TRAIN_OSC_PARAMS, 100, 0.03, DEFAULT_STATE0, seed=9)
    b = gen_oscillator(TRAIN_OSC_PARAMS, 100, 0.03, DEFAULT_STATE0, seed=9)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


def test_shifted_params_change_trajectory():
    shifted = shifted_osc_params(TRAIN_OSC_PARAMS)
    assert (shifted.m1, shifted.m2, shifted.k1) == (1.1, 2.4, 1.3)
    assert (shifted.k2, shifted.k3) == (TRAIN_OSC_PARAMS.k2,
                                        TRAIN_OSC_PARAMS.k3)
    base = integrate(TRAIN_OSC_PARAMS, DEFAULT_STATE0, dt=0.01, steps=3000)
    moved = integrate(shifted, DEFAULT_STATE0, dt=0.01, steps=3000)
    dp1 = max(abs(a.p1 - b.p1) for a, b in zip(base, moved))
    assert dp1 > 0.0


def test_continue_stream_switches_mid_trajectory():
    shifted = shifted_osc_params(TRAIN_OSC_PARAMS)
    dt = 0.01
    pre = continue_stream(TRAIN_OSC_PARAMS, shifted, 10, 10, DEFAULT_STATE0,
                          dt, 0.0, seed=1)
    ref = integrate(TRAIN_OSC_PARAMS, DEFAULT_STATE0, dt=dt, steps=10)
    # pre-shift rows keep following the baseline dynamics (state0 itself
    # is not emitted)
    assert np.allclose(pre.X[:10],
                       np.array([s.vector() for s in ref[1:]]), atol=1e-12)
    # post-shift rows leave the baseline trajectory
    long = integrate(TRAIN_OSC_PARAMS, DEFAULT_STATE0, dt=dt, steps=20)
    tail = np.array([s.vector() for s in long[11:]])
    assert not np.allclose(pre.X[10:], tail, atol=1e-9)


def test_osc_params_validation():
    with pytest.raises(InputError):
        OscParams(m1=0.0, m2=2.0, k1=1.0, k2=2.0, k3=1.5, c1=0.1, c2=0.2)
    with pytest.raises(InputError):
        OscParams(m1=1.0, m2=2.0, k1=1.0, k2=2.0, k3=1.5, c1=-0.1, c2=0.2)
    # zero damping is allowed
    OscParams(m1=1.0, m2=2.0, k1=1.0, k2=2.0, k3=1.5, c1=0.0, c2=0.0)


def test_integrate_divergence_error():
    # negative-stiffness dynamics blow up; the integrator must say so
    bad = OscParams(m1=1e-9, m2=1e-9, k1=1e9, k2=1e9, k3=1e9, c1=0.0, c2=0.0)
    with pytest.raises(DivergenceError):
        integrate(bad, OscState(1e300, 0, -1e300, 0), dt=1.0, steps=10,
                  max_substep=1.0)
