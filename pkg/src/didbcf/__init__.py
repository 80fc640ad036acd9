"""Bayesian causal forests for difference-in-differences panel data.

Public surface: panel ingestion and validation, the five simulation
generators, the two-forest effect model, posterior estimand summaries,
closed-form benchmark estimators, and the Monte Carlo harness.
"""

from .dgp import DgpConfig, TruthRecord, simulate_dgp
from .estimands import (
    EstimandReport,
    aggregate_estimand,
    att_report,
    bayes_test,
    catt_reports_by_bins,
    gatt_reports,
)
from .evalharness import (
    McResult,
    Metrics,
    compute_metrics,
    rejection_frequency,
    run_monte_carlo,
)
from .model import (
    DidBcfConfig,
    EstimationError,
    PosteriorDraws,
    ScaleParams,
    draw_scales,
    extract_tau_draws,
    fit_didbcf,
    treatment_contribution,
)
from .panel import (
    NEVER,
    EventTime,
    PanelDataset,
    PanelSchema,
    ValidationReport,
    event_time,
    load_panel,
    treatment_indicator,
    validate_panel,
    write_panel,
)

__version__ = "0.1.0"

__all__ = [
    "DgpConfig",
    "DidBcfConfig",
    "EstimandReport",
    "EstimationError",
    "EventTime",
    "McResult",
    "Metrics",
    "NEVER",
    "PanelDataset",
    "PanelSchema",
    "PosteriorDraws",
    "ScaleParams",
    "TruthRecord",
    "ValidationReport",
    "aggregate_estimand",
    "att_report",
    "bayes_test",
    "catt_reports_by_bins",
    "compute_metrics",
    "draw_scales",
    "event_time",
    "extract_tau_draws",
    "fit_didbcf",
    "gatt_reports",
    "load_panel",
    "rejection_frequency",
    "run_monte_carlo",
    "simulate_dgp",
    "treatment_contribution",
    "treatment_indicator",
    "validate_panel",
    "write_panel",
]
