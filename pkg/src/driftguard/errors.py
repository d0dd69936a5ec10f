"""Exception hierarchy shared across the package.

Exit codes follow the CLI contract: 2 for bad input, 3 for numerical
failure. Library code raises these; the CLI maps them to process exits.
"""

from __future__ import annotations


class DriftguardError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InputError(DriftguardError):
    """Malformed data, config, or arguments."""

    exit_code = 2


class NumericalError(DriftguardError):
    """A computation failed for numerical reasons."""

    exit_code = 3


class DegenerateDesignError(NumericalError):
    """Singular normal equations with no regularization to rescue them."""


class ConditioningError(NumericalError):
    """Covariance too ill-conditioned to invert; raise epsilon."""


class DivergenceError(NumericalError):
    """ODE state left the finite range during integration."""


class CalibrationError(NumericalError):
    """A bootstrap replicate could not be completed."""


class FitWarning(UserWarning):
    """Model training finished without meeting its convergence check."""


class QuantileWarning(UserWarning):
    """Too few samples to estimate the requested upper quantile reliably."""
