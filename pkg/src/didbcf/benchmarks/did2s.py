"""Two-stage estimator: fixed effects from untreated rows, then treated-cell
effects from the adjusted outcomes.

Stage one regresses the outcome on adoption-group dummies, period dummies,
and covariates using only rows with D_it = 0. Stage two regresses the
adjusted outcome on disjoint (group, period) treated-cell indicators over the
full sample. Stage-two p-values use an HC1 sandwich and are approximate: the
sequential procedure ignores first-stage estimation error (no joint GMM).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..panel import NEVER, PanelDataset
from .linear import LinearFit, hc1_covariance, least_squares, linear_combination_test


@dataclass
class Did2sResult:
    groups: np.ndarray        # adoption time per estimated cell
    periods: np.ndarray       # calendar period per estimated cell
    effects: np.ndarray       # beta_{g,t}
    se: np.ndarray
    p_values: np.ndarray
    cell_sizes: np.ndarray
    overall: float            # cell-size weighted average
    overall_se: float
    overall_p: float
    first_stage: LinearFit

    def effect_at(self, g: int, t: int) -> float:
        idx = np.flatnonzero((self.groups == g) & (self.periods == t))
        if idx.size == 0:
            raise KeyError(f"no effect estimated for cell (g={g}, t={t})")
        return float(self.effects[idx[0]])


def fit_did2s(panel: PanelDataset) -> Did2sResult:
    """Sequential two-stage least squares over a balanced panel."""
    if not panel.is_balanced:
        raise ValueError("two-stage estimator requires a balanced panel")
    treated = panel.treated()
    if not treated.any():
        raise ValueError("panel has no treated rows")
    untreated = ~treated
    t = panel.calendar_time()
    for period in panel.times:
        if not untreated[t == period].any():
            raise ValueError(
                f"period {int(period)} has no untreated rows; period effect "
                "is unidentified")

    g_row = panel.row_adoption()
    groups = np.unique(g_row)

    cols, labels = [], []
    for g in groups:
        name = "g=never" if g == NEVER else f"g={int(g)}"
        cols.append((g_row == g).astype(float))
        labels.append(name)
    for period in panel.times[1:]:
        cols.append((t == period).astype(float))
        labels.append(f"t={int(period)}")
    for j, name in enumerate(panel.covariate_names):
        cols.append(panel.x[:, j])
        labels.append(name)
    design = np.column_stack(cols)

    stage1 = least_squares(design[untreated], panel.y[untreated], labels)
    kept = [labels.index(lbl) for lbl in stage1.columns]
    adjusted = panel.y - design[:, kept] @ stage1.coef

    cells = sorted({(int(g_row[i]), int(t[i]))
                    for i in np.flatnonzero(treated)})
    cell_cols = [((g_row == g) & (t == tt) & treated).astype(float)
                 for g, tt in cells]
    stage2 = least_squares(np.column_stack(cell_cols), adjusted,
                           labels=[f"g={g},t={tt}" for g, tt in cells])
    cov = hc1_covariance(stage2)
    dof = panel.n_rows - len(stage2.columns)

    effects, ses, ps, sizes = [], [], [], []
    for i, (g, tt) in enumerate(cells):
        w = np.zeros(len(cells))
        w[i] = 1.0
        est, se, p = linear_combination_test(stage2, w, cov, dof)
        effects.append(est)
        ses.append(se)
        ps.append(p)
        sizes.append(int(cell_cols[i].sum()))

    sizes_arr = np.array(sizes, dtype=float)
    w = sizes_arr / sizes_arr.sum()
    overall, overall_se, overall_p = linear_combination_test(stage2, w, cov, dof)

    return Did2sResult(
        groups=np.array([g for g, _ in cells]),
        periods=np.array([tt for _, tt in cells]),
        effects=np.array(effects),
        se=np.array(ses),
        p_values=np.array(ps),
        cell_sizes=np.array(sizes),
        overall=overall,
        overall_se=overall_se,
        overall_p=overall_p,
        first_stage=stage1,
    )
