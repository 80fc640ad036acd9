"""Cutpoint grids for tree splits."""

from __future__ import annotations

import numpy as np


def split_candidates(values, grid_size: int) -> np.ndarray:
    """Candidate cutpoints for one variable at a node.

    Few distinct values: midpoints between consecutive distinct values.
    Otherwise: grid_size interior empirical quantiles. Cutpoints that would
    route every row to one side (rule x <= c) are excluded; an empty result is
    legal and forces the no-split option. Categorical variables ride on their
    numeric codes, so their splits are value subsets of the form {<= code}.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("split_candidates requires a nonempty node")
    distinct = np.unique(values)
    if distinct.size <= 1:
        return np.empty(0)
    if distinct.size - 1 <= grid_size:
        return 0.5 * (distinct[:-1] + distinct[1:])
    qs = np.arange(1, grid_size + 1) / (grid_size + 1)
    cuts = np.unique(np.quantile(values, qs))
    return cuts[(cuts >= distinct[0]) & (cuts < distinct[-1])]
