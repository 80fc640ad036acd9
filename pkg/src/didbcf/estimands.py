"""Posterior aggregation of effect draws into overall, group, and conditional
summaries, plus the two-sided Bayesian sign test."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .model import PosteriorDraws
from .panel import PanelDataset


@dataclass(frozen=True)
class EstimandReport:
    kind: str            # "att" | "gatt" | "catt"
    key: str
    mean: float
    sd: float
    q025: float
    q50: float
    q975: float
    p_bayes: float
    n_rows: int
    n_draws: int

    def to_dict(self) -> dict:
        return asdict(self)


def bayes_test(draws) -> float:
    """min(P(effect > 0 | data), P(effect < 0 | data)) from posterior draws.

    Draws exactly at zero count toward neither side, so the result always
    lies in [0, 0.5].
    """
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0:
        raise ValueError("bayes_test requires at least one draw")
    n = draws.size
    return min(float((draws > 0).sum()) / n, float((draws < 0).sum()) / n)


def aggregate_estimand(tau_draws: np.ndarray, kind: str, key: str,
                       columns=None) -> EstimandReport:
    """Summarize the posterior of the draw-wise average over a cell set.

    `tau_draws` is (draws, cells); `columns` selects the cell subset (all by
    default). Quantiles use linear (type-7) interpolation on sorted draws.
    """
    tau_draws = np.atleast_2d(np.asarray(tau_draws, dtype=float))
    if columns is None:
        sub = tau_draws
    else:
        columns = np.atleast_1d(np.asarray(columns, dtype=int))
        if columns.size == 0:
            raise ValueError(f"estimand {kind}[{key}] selects no cells")
        sub = tau_draws[:, columns]
    if sub.shape[1] == 0:
        raise ValueError(f"estimand {kind}[{key}] selects no cells")
    scalar = sub.mean(axis=1)
    q025, q50, q975 = np.quantile(scalar, [0.025, 0.5, 0.975])
    return EstimandReport(
        kind=kind,
        key=key,
        mean=float(scalar.mean()),
        sd=float(scalar.std()),
        q025=float(q025),
        q50=float(q50),
        q975=float(q975),
        p_bayes=bayes_test(scalar),
        n_rows=sub.shape[1],
        n_draws=sub.shape[0],
    )


def _treated_cell_frame(panel: PanelDataset, draws: PosteriorDraws):
    rows = draws.treated_rows
    k, _ = panel.event_times()
    return {
        "rows": rows,
        "g": panel.row_adoption()[rows].astype(int),
        "t": panel.calendar_time()[rows].astype(int),
        "k": k[rows].astype(int),
    }


def att_report(draws: PosteriorDraws) -> EstimandReport:
    """Average effect over every treated cell."""
    return aggregate_estimand(draws.tau, "att", "att")


def gatt_reports(panel: PanelDataset, draws: PosteriorDraws,
                 by: str = "k") -> list[EstimandReport]:
    """Group-average effects keyed by adoption group and event time (default)
    or calendar time (`by="t"`)."""
    if by not in ("k", "t"):
        raise ValueError("by must be 'k' or 't'")
    cells = _treated_cell_frame(panel, draws)
    reports = []
    second = cells[by]
    for g in np.unique(cells["g"]):
        for v in np.unique(second[cells["g"] == g]):
            cols = np.flatnonzero((cells["g"] == g) & (second == v))
            reports.append(aggregate_estimand(
                draws.tau, "gatt", f"g={g},{by}={v}", cols))
    return reports


def catt_reports_by_bins(panel: PanelDataset, draws: PosteriorDraws,
                         covariate: str, n_bins: int = 3) -> list[EstimandReport]:
    """Conditional effects averaged within empirical quantile bins (tertiles
    by default) of one covariate over the treated cells."""
    if covariate not in panel.covariate_names:
        raise ValueError(f"unknown covariate {covariate!r}")
    j = panel.covariate_names.index(covariate)
    values = panel.x[draws.treated_rows, j]
    edges = np.quantile(values, np.arange(1, n_bins) / n_bins)
    bins = np.searchsorted(edges, values, side="left")
    labels = _bin_labels(n_bins)
    reports = []
    for b in range(n_bins):
        cols = np.flatnonzero(bins == b)
        if cols.size == 0:
            raise ValueError(f"estimand catt[{covariate}:{labels[b]}] selects no cells")
        reports.append(aggregate_estimand(
            draws.tau, "catt", f"{covariate}:{labels[b]}", cols))
    return reports


def catt_report_for_rows(draws: PosteriorDraws, rows, key: str) -> EstimandReport:
    """Conditional effect averaged over an explicit treated-row set."""
    rows = np.atleast_1d(np.asarray(rows, dtype=int))
    col = {int(r): i for i, r in enumerate(draws.treated_rows)}
    missing = [int(r) for r in rows if int(r) not in col]
    if missing:
        raise ValueError(f"estimand catt[{key}]: row {missing[0]} is not a treated row")
    return aggregate_estimand(draws.tau, "catt", key,
                              [col[int(r)] for r in rows])


def _bin_labels(n_bins: int) -> list[str]:
    edges = [round(100 * i / n_bins) for i in range(n_bins + 1)]
    return [f"p{edges[i]}-p{edges[i + 1]}" for i in range(n_bins)]
