"""Event-study two-way regression: outcome on an ever-treated indicator,
period dummies, covariates, and event-time dummies for ever-treated units
with k = -1 as the omitted reference."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..panel import PanelDataset
from .linear import LinearFit, cluster_covariance, least_squares, linear_combination_test


@dataclass
class TwfeResult:
    event_times: np.ndarray      # estimated k values (reference -1 absent)
    effects: np.ndarray          # beta_k
    se: np.ndarray
    p_values: np.ndarray
    overall: float               # equal-weight average of post-period beta_k
    overall_se: float
    overall_p: float
    fit: LinearFit

    def effect_at(self, k: int) -> float:
        idx = np.flatnonzero(self.event_times == k)
        if idx.size == 0:
            raise KeyError(f"no event-time coefficient for k={k}")
        return float(self.effects[idx[0]])


def fit_twfe(panel: PanelDataset) -> TwfeResult:
    """Least-squares event study with unit-clustered standard errors.

    Post-period coefficients (k >= 0) are reported individually and as an
    equal-weight average used for the overall no-effect test.
    """
    if panel.n_times < 2:
        raise ValueError("need at least two periods")
    ever = panel.ever_treated()
    if not ever.any() or ever.all():
        raise ValueError("need both ever-treated and never-treated units")

    t = panel.calendar_time()
    k, defined = panel.event_times()

    cols = [np.ones(panel.n_rows)]
    labels: list = ["intercept"]
    cols.append(ever.astype(float))
    labels.append("ever")
    for period in panel.times[1:]:
        cols.append((t == period).astype(float))
        labels.append(f"t={int(period)}")
    for j, name in enumerate(panel.covariate_names):
        cols.append(panel.x[:, j])
        labels.append(name)
    event_ks = np.unique(k[defined & (k != -1)]).astype(int)
    for kk in event_ks:
        cols.append((defined & (k == kk)).astype(float))
        labels.append(f"k={kk}")

    fit = least_squares(np.column_stack(cols), panel.y, labels)
    cov = cluster_covariance(fit, panel.unit_idx)
    dof = panel.n_units - 1

    kept_ks = [int(lbl.split("=")[1]) for lbl in fit.columns
               if isinstance(lbl, str) and lbl.startswith("k=")]
    effects, ses, ps = [], [], []
    for kk in kept_ks:
        w = np.zeros(len(fit.columns))
        w[fit.columns.index(f"k={kk}")] = 1.0
        est, se, p = linear_combination_test(fit, w, cov, dof)
        effects.append(est)
        ses.append(se)
        ps.append(p)

    post = [kk for kk in kept_ks if kk >= 0]
    if not post:
        raise ValueError("no post-treatment event times in panel")
    w = np.zeros(len(fit.columns))
    for kk in post:
        w[fit.columns.index(f"k={kk}")] = 1.0 / len(post)
    overall, overall_se, overall_p = linear_combination_test(fit, w, cov, dof)

    return TwfeResult(
        event_times=np.array(kept_ks),
        effects=np.array(effects),
        se=np.array(ses),
        p_values=np.array(ps),
        overall=overall,
        overall_se=overall_se,
        overall_p=overall_p,
        fit=fit,
    )
