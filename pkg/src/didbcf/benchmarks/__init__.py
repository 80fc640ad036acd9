"""Closed-form comparison estimators: event-study least squares, the
two-stage estimator, and synthetic DiD."""

from .did2s import Did2sResult, fit_did2s
from .linear import (
    LinearFit,
    cluster_covariance,
    hc1_covariance,
    least_squares,
    linear_combination_test,
)
from .sdid import (
    SdidNotApplicable,
    SdidResult,
    SdidWeights,
    fit_sdid,
    solve_simplex_ridge,
)
from .twfe import TwfeResult, fit_twfe

__all__ = [
    "Did2sResult",
    "LinearFit",
    "SdidNotApplicable",
    "SdidResult",
    "SdidWeights",
    "TwfeResult",
    "cluster_covariance",
    "fit_did2s",
    "fit_sdid",
    "fit_twfe",
    "hc1_covariance",
    "least_squares",
    "linear_combination_test",
    "solve_simplex_ridge",
]
