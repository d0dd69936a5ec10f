"""Score-based concept drift monitoring with bootstrapped control limits.

Fit a regression model once, watch the stream of per-observation score
vectors (gradients of the penalized loss) through a multivariate EWMA,
and signal when the T^2 statistic crosses a time-varying control limit
calibrated by a nested bootstrap on the training set.
"""

__version__ = "0.1.0"

from .bootstrap import (ARTIFACT_VERSION, BaselineSplit, BootstrapConfig,
                        Calibration, baseline_split_cl, calibrate,
                        inflation_curve, inflation_factor, inner_t_curve,
                        quantile_upper)
from .dataset import Dataset
from .datagen import (CURVE1, CURVE2, DEFAULT_STATE0, LINEAR_NOISE_SD,
                      TRAIN_OSC_PARAMS, OscParams, OscState, energy,
                      gen_linear, gen_oscillator, integrate,
                      mechanical_energy, osc_derivative, shifted_osc_params)
from .errors import (CalibrationError, ConditioningError,
                     DegenerateDesignError, DivergenceError, DriftguardError,
                     FitWarning, InputError, NumericalError, QuantileWarning)
from .linmodel import FittedLinearModel, fit_ridge, score_linear
from .mewma import (MewmaState, ScoreMoments, estimate_moments, mewma_init,
                    moments_from, t2, update)
from .monitor import (MonitorRecord, first_signal, monitor_stream,
                      records_to_csv, signals_vector)
from .nnmodel import FittedMLP, TrainConfig, cv_r2, fit_mlp, score_mlp
from .rng import subseed, substream
from .studies import (StudyConfig, StudyResult, detect_study, far_study,
                      write_detect_times_csv, write_far_curve_csv)

__all__ = [
    "ARTIFACT_VERSION", "BaselineSplit", "BootstrapConfig", "Calibration",
    "CalibrationError", "ConditioningError", "CURVE1", "CURVE2", "Dataset",
    "DEFAULT_STATE0", "DegenerateDesignError", "DivergenceError",
    "DriftguardError", "FitWarning", "FittedLinearModel", "FittedMLP",
    "InputError", "LINEAR_NOISE_SD", "MewmaState", "MonitorRecord",
    "NumericalError", "OscParams", "OscState", "QuantileWarning",
    "ScoreMoments", "StudyConfig", "StudyResult", "TRAIN_OSC_PARAMS",
    "TrainConfig", "baseline_split_cl", "calibrate", "cv_r2", "detect_study",
    "energy", "estimate_moments", "far_study", "first_signal", "fit_mlp",
    "fit_ridge", "gen_linear", "gen_oscillator", "inflation_curve",
    "inflation_factor", "inner_t_curve", "integrate", "mechanical_energy",
    "mewma_init", "moments_from", "monitor_stream", "osc_derivative",
    "quantile_upper", "records_to_csv", "score_linear", "score_mlp",
    "shifted_osc_params", "signals_vector", "subseed", "substream", "t2",
    "update", "write_detect_times_csv", "write_far_curve_csv",
    "__version__",
]
