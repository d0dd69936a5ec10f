import json
import math
import warnings

import numpy as np
import pytest

from driftguard import (BootstrapConfig, Calibration, CalibrationError,
                        Dataset, InputError, QuantileWarning,
                        baseline_split_cl, calibrate, fit_ridge, gen_linear,
                        inflation_curve, inflation_factor, inner_t_curve,
                        moments_from, quantile_upper, substream)
from driftguard.bootstrap import (_outer_block, draw_outer,
                                  draw_outer_nonempty)
from driftguard.mewma import estimate_moments

# ------------------------------------------------------- inflation factor

def test_inflation_large_n_is_one():
    for lam in (0.01, 0.2, 0.9):
        for i in (1, 10, 1000):
            assert abs(inflation_factor(lam, i, 10**9) - 1.0) < 1e-6


def test_inflation_frozen_oracle_values():
    # recomputed with 50-digit arithmetic before freezing
    assert abs(inflation_factor(0.01, 1, 2000) - 1.00135932033983) < 1e-12
    limit = (0.01 / 1.99 + 3.72 / 2000) / (0.01 / 1.99 + 1.0 / 2000)
    assert abs(limit - 1.2461482492041838) < 1e-12


def test_inflation_increasing_to_limit():
    # k is strictly increasing in exact arithmetic; in float64 the curve
    # saturates at the limit once (1-lam)^i drops below one ulp, so the
    # tail is checked for weak monotonicity only
    for lam, n in ((0.01, 2000), (0.05, 500), (0.3, 100)):
        i_sat = math.ceil(40.0 / lam)
        k = inflation_curve(lam, i_sat, n)
        assert np.all(np.diff(k) >= 0)
        strict = math.ceil(10.0 / lam)
        assert np.all(np.diff(k[:strict]) > 0)
        assert k[0] > 1.0
        limit = (lam / (2 - lam) + 3.72 / n) / (lam / (2 - lam) + 1.0 / n)
        assert abs(k[-1] - limit) < 1e-10
        assert np.all(k <= 3.72)


def test_inflation_curve_matches_pointwise():
    k = inflation_curve(0.05, 50, 300)
    for i in (1, 7, 50):
        assert k[i - 1] == inflation_factor(0.05, i, 300)


def test_inflation_validation():
    with pytest.raises(InputError):
        inflation_factor(0.0, 1, 100)
    with pytest.raises(InputError):
        inflation_factor(0.5, 0, 100)
    with pytest.raises(InputError):
        inflation_factor(0.5, 1, 0)


# --------------------------------------------------------------- quantile

def test_quantile_hand_examples():
    assert quantile_upper(np.arange(1.0, 1001.0), 0.001) == 999.0
    assert quantile_upper(np.full(7, 3.25), 0.2) == 3.25
    assert quantile_upper(np.array([1.0, 2.0, 3.0, 4.0]), 0.5) == 2.0


def test_quantile_brute_force_oracle():
    rng = substream(12, "test-quantile")
    for _ in range(200):
        n = int(rng.integers(5, 400))
        alpha = float(rng.uniform(0.01, 0.45))
        vals = rng.normal(size=n)
        q = quantile_upper(vals, alpha)
        assert np.sum(vals > q) <= math.ceil(alpha * n)
        # the order statistic itself comes from the sample
        assert q in vals


def test_quantile_validation():
    with pytest.raises(InputError):
        quantile_upper([], 0.1)
    with pytest.raises(InputError):
        quantile_upper([1.0], 1.5)


# ------------------------------------------------------------- outer draw

def test_draw_outer_deterministic():
    data = gen_linear(100, "single", seed=0)
    a_res, a_oob = draw_outer(data, substream(5, "outer", 3, 0))
    b_res, b_oob = draw_outer(data, substream(5, "outer", 3, 0))
    assert np.array_equal(a_res.X, b_res.X)
    assert np.array_equal(a_oob, b_oob)
    assert np.all(np.diff(a_oob) > 0)      # sorted, unique


def test_draw_outer_oob_fraction():
    data = gen_linear(2000, "single", seed=1)
    rng = substream(2, "test-oob")
    fracs = [draw_outer(data, rng)[1].size / 2000 for _ in range(1000)]
    assert abs(np.mean(fracs) - 0.368) < 0.01


def test_draw_outer_resample_contains_only_data_rows():
    data = gen_linear(50, "single", seed=3)
    resample, oob = draw_outer(data, substream(0, "x"))
    present = {tuple(r) for r in np.column_stack([data.X[:, 0], data.y])}
    assert all((x, y) in present
               for x, y in np.column_stack([resample.X[:, 0], resample.y]))
    assert oob.size < data.n


def test_single_point_dataset_exhausts_redraws():
    data = Dataset(np.array([[1.0]]), np.array([2.0]))
    with pytest.raises(CalibrationError):
        draw_outer_nonempty(data, seed=0, b=0, max_attempts=50)


# ----------------------------------------------------------- inner stream

def test_inner_t_curve_zero_scores_zero_curve():
    cfg = BootstrapConfig(b_outer=2, b_inner=2, lam=0.2, alpha=0.05,
                          horizon=20)
    moments = moments_from(np.zeros(3), np.eye(3), 0.0)
    oob = np.zeros((10, 3))
    curve = inner_t_curve(oob, moments, cfg, np.ones(20), substream(1, "j"))
    assert np.array_equal(curve, np.zeros(20))


def test_inner_t_curve_single_vector_hand_case():
    v = np.array([2.0, -1.0])
    cfg = BootstrapConfig(b_outer=2, b_inner=2, lam=0.5, alpha=0.05, horizon=2)
    moments = moments_from(np.zeros(2), np.eye(2), 0.0)
    k = inflation_curve(0.5, 2, 100)
    curve = inner_t_curve(v[None, :], moments, cfg, k, substream(3, "j"))
    # constant stream: z1 = 0.5 v, z2 = 0.75 v; T_i = |z_i|^2 / k_i
    vv = float(v @ v)
    assert np.allclose(curve, [0.25 * vv / k[0], 0.5625 * vv / k[1]],
                       atol=1e-14)


def test_outer_block_matches_reference_loop():
    data = gen_linear(60, "single", seed=21)
    cfg = BootstrapConfig(b_outer=3, b_inner=4, lam=0.05, alpha=0.05,
                          horizon=30, seed=77)
    model = fit_ridge(data, 0.1)
    eps = estimate_moments(model.scores(data.X, data.y)).epsilon
    k = inflation_curve(cfg.lam, cfg.horizon, data.n)
    block, _ = _outer_block(data, "ridge", 0.1, cfg, None, None, eps,
                            np.sqrt(k), 1, False)
    resample, oob = draw_outer_nonempty(data, cfg.seed, 1)
    refit = fit_ridge(resample, 0.1)
    moments_b = estimate_moments(refit.scores(resample.X, resample.y),
                                 epsilon=eps)
    s_oob = refit.scores(data.X[oob], data.y[oob])
    for j in range(cfg.b_inner):
        ref = inner_t_curve(s_oob, moments_b, cfg, k,
                            substream(cfg.seed, "inner", 1, j))
        assert np.allclose(block[j], ref, rtol=1e-10, atol=1e-12)


# -------------------------------------------------------------- calibrate

def test_calibrate_smoke():
    data = gen_linear(50, "single", seed=6)
    cfg = BootstrapConfig(b_outer=2, b_inner=2, lam=0.1, alpha=0.25,
                          horizon=3, seed=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", QuantileWarning)
        cal = calibrate(data, "ridge", 0.1, cfg)
    assert cal.cl.shape == (3,)
    assert np.all(cal.cl > 0)
    assert cal.method == "nested-bootstrap"


def test_calibrate_refuses_tiny_data():
    data = gen_linear(20, "single", seed=6)
    with pytest.raises(InputError):
        calibrate(data, "ridge", 0.1, BootstrapConfig(alpha=0.25))


def test_calibrate_cl_stabilizes():
    data = gen_linear(2000, "single", seed=30)
    cal = calibrate(data, "ridge", 0.1, BootstrapConfig(seed=3))
    assert 0.8 <= cal.cl[-1] / cal.cl[499] <= 1.5


def test_calibrate_naive_dominates_corrected():
    data = gen_linear(200, "single", seed=8)
    cfg = BootstrapConfig(b_outer=10, b_inner=20, lam=0.05, alpha=0.05,
                          horizon=60, seed=9)
    cal = calibrate(data, "ridge", 0.1, cfg, with_naive=True)
    assert np.all(cal.cl_naive >= cal.cl - 1e-15)
    # strict for large i, where k is far from 1
    assert cal.cl_naive[-1] > cal.cl[-1]


def test_calibrate_deterministic_and_worker_invariant():
    data = gen_linear(60, "single", seed=10)
    cfg = BootstrapConfig(b_outer=4, b_inner=5, lam=0.1, alpha=0.2,
                          horizon=10, seed=42)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", QuantileWarning)
        a = calibrate(data, "ridge", 0.1, cfg)
        b = calibrate(data, "ridge", 0.1, cfg)
        c = calibrate(data, "ridge", 0.1, cfg, workers=2)
    assert np.array_equal(a.cl, b.cl)
    assert np.array_equal(a.cl, c.cl)
    assert np.array_equal(a.model.theta, c.model.theta)


def test_bootstrap_config_validation_and_warning():
    with pytest.raises(InputError):
        BootstrapConfig(lam=0.0)
    with pytest.raises(InputError):
        BootstrapConfig(alpha=0.7)
    with pytest.raises(InputError):
        BootstrapConfig(b_outer=0)
    with pytest.warns(QuantileWarning):
        BootstrapConfig(b_outer=2, b_inner=2, alpha=0.001)


# --------------------------------------------------------------- artifact

def test_calibration_roundtrip(tmp_path):
    data = gen_linear(50, "single", seed=6)
    cfg = BootstrapConfig(b_outer=2, b_inner=2, lam=0.1, alpha=0.25,
                          horizon=3, seed=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", QuantileWarning)
        cal = calibrate(data, "ridge", 0.1, cfg, with_naive=True)
    path = tmp_path / "cal.json"
    cal.save(path)
    clone = Calibration.load(path)
    assert clone.method == cal.method
    assert np.array_equal(clone.cl, cal.cl)
    assert np.array_equal(clone.cl_naive, cal.cl_naive)
    assert np.array_equal(clone.k_curve, cal.k_curve)
    assert np.array_equal(clone.model.theta, cal.model.theta)
    assert np.array_equal(clone.moments.precision, cal.moments.precision)


def test_calibration_version_check(tmp_path):
    data = gen_linear(50, "single", seed=6)
    cfg = BootstrapConfig(b_outer=2, b_inner=2, lam=0.1, alpha=0.25,
                          horizon=3, seed=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", QuantileWarning)
        cal = calibrate(data, "ridge", 0.1, cfg)
    path = tmp_path / "cal.json"
    cal.save(path)
    doc = json.loads(path.read_text())
    doc["version"] = "driftguard-cal/99"
    path.write_text(json.dumps(doc))
    with pytest.raises(InputError):
        Calibration.load(path)


def test_cl_at_clamps_to_last():
    cal_cl = np.array([1.0, 2.0, 3.0])
    data = gen_linear(50, "single", seed=6)
    model = fit_ridge(data, 0.1)
    m = estimate_moments(model.scores(data.X, data.y))
    cal = Calibration(method="nested-bootstrap", model=model, moments=m,
                      lam=0.1, alpha=0.05, cl=cal_cl,
                      k_curve=inflation_curve(0.1, 3, 50))
    assert cal.cl_at(1) == 1.0
    assert cal.cl_at(3) == 3.0
    assert cal.cl_at(4) == 3.0
    assert cal.cl_at(1000) == 3.0
    with pytest.raises(InputError):
        cal.cl_at(0)


# ----------------------------------------------------------------baseline

def test_baseline_warning_at_full_scale():
    data = gen_linear(2000, "single", seed=14)
    with pytest.warns(QuantileWarning):
        base = baseline_split_cl(data, 0.5, 0.1, 0.01, 0.001)
    assert base.cl > 0
    assert base.model.n_train == 1000


def test_baseline_no_warning_with_loose_alpha():
    data = gen_linear(2000, "single", seed=14)
    with warnings.catch_warnings():
        warnings.simplefilter("error", QuantileWarning)
        base = baseline_split_cl(data, 0.5, 0.1, 0.01, 0.05)
    assert base.cl > 0


def test_baseline_degenerate_scores_zero_cl():
    # exact fit on a line through {0,1} keeps every residual at exactly
    # zero, so D2's scores, MEWMA, and T^2 are all identically zero
    x = np.tile([0.0, 1.0], 32)
    data = Dataset(x[:, None], 2.0 * x)
    base = baseline_split_cl(data, 0.5, 0.0, 0.1, 0.05, epsilon=1.0)
    assert base.cl == 0.0
    cal = base.to_calibration()
    assert cal.method == "split-baseline"
    assert cal.cl_at(17) == 0.0


def test_baseline_split_too_small():
    data = gen_linear(40, "single", seed=2)
    with pytest.raises(InputError):
        baseline_split_cl(data, 0.5, 0.1, 0.01, 0.05)


def test_baseline_roundtrip(tmp_path):
    data = gen_linear(200, "single", seed=19)
    base = baseline_split_cl(data, 0.5, 0.1, 0.05, 0.05)
    art = base.to_calibration()
    path = tmp_path / "base.json"
    art.save(path)
    clone = Calibration.load(path)
    assert clone.method == "split-baseline"
    assert clone.split_fraction == 0.5
    assert np.array_equal(clone.cl, art.cl)
