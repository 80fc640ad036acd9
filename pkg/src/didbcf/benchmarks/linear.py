"""Shared least-squares solver with deterministic collinearity handling and
sandwich covariance estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LinearFit:
    coef: np.ndarray          # over kept columns
    cov: np.ndarray           # classical covariance over kept columns
    residuals: np.ndarray
    columns: list             # labels of kept columns
    dropped: list             # labels of dropped (collinear) columns
    design: np.ndarray        # kept-column design, for sandwich estimators
    xtx_inv: np.ndarray

    def coefficient(self, label) -> float:
        return float(self.coef[self.columns.index(label)])


def least_squares(design: np.ndarray, response: np.ndarray,
                  labels=None) -> LinearFit:
    """Minimum-norm least squares with left-to-right collinearity drops.

    Columns are orthogonalized in order; a column whose residual against the
    previously kept columns is numerically zero is dropped and reported. The
    fit on the kept columns goes through an SVD-based solver.
    """
    x = np.atleast_2d(np.asarray(design, dtype=float))
    y = np.asarray(response, dtype=float)
    n, k = x.shape
    if labels is None:
        labels = list(range(k))
    if len(labels) != k:
        raise ValueError("labels length must match design width")

    kept: list[int] = []
    dropped: list[int] = []
    basis = np.zeros((n, 0))
    for j in range(k):
        col = x[:, j]
        resid = col - basis @ (basis.T @ col)
        norm = np.linalg.norm(resid)
        if norm > 1e-10 * max(np.linalg.norm(col), 1.0):
            kept.append(j)
            basis = np.column_stack([basis, resid / norm])
        else:
            dropped.append(j)
    if not kept:
        raise ValueError("design has rank zero")
    if n < len(kept):
        raise ValueError("fewer rows than independent columns")

    xk = x[:, kept]
    coef, _, _, _ = np.linalg.lstsq(xk, y, rcond=None)
    residuals = y - xk @ coef
    dof = max(n - len(kept), 1)
    sigma2 = float(residuals @ residuals) / dof
    xtx_inv = np.linalg.inv(xk.T @ xk)
    cov = sigma2 * xtx_inv
    cov = 0.5 * (cov + cov.T)
    return LinearFit(
        coef=coef,
        cov=cov,
        residuals=residuals,
        columns=[labels[j] for j in kept],
        dropped=[labels[j] for j in dropped],
        design=xk,
        xtx_inv=xtx_inv,
    )


def cluster_covariance(fit: LinearFit, clusters) -> np.ndarray:
    """One-way cluster-robust sandwich with the CR1 small-sample factor."""
    clusters = np.asarray(clusters)
    x, e = fit.design, fit.residuals
    n, k = x.shape
    meat = np.zeros((k, k))
    for c in np.unique(clusters):
        rows = clusters == c
        s = x[rows].T @ e[rows]
        meat += np.outer(s, s)
    g = np.unique(clusters).size
    correction = g / (g - 1) * (n - 1) / max(n - k, 1) if g > 1 else 1.0
    cov = correction * fit.xtx_inv @ meat @ fit.xtx_inv
    return 0.5 * (cov + cov.T)


def hc1_covariance(fit: LinearFit) -> np.ndarray:
    """Heteroskedasticity-robust sandwich with the n/(n-k) factor."""
    x, e = fit.design, fit.residuals
    n, k = x.shape
    meat = (x * e[:, None] ** 2).T @ x
    cov = n / max(n - k, 1) * fit.xtx_inv @ meat @ fit.xtx_inv
    return 0.5 * (cov + cov.T)


def linear_combination_test(fit: LinearFit, weights: np.ndarray,
                            cov: np.ndarray, dof: float):
    """Estimate, se, and two-sided p-value for weights @ coef under a
    t reference with the given degrees of freedom."""
    from scipy.stats import t as t_dist

    est = float(weights @ fit.coef)
    var = float(weights @ cov @ weights)
    se = np.sqrt(max(var, 0.0))
    if se == 0:
        return est, 0.0, 0.0 if est != 0 else 1.0
    stat = est / se
    p = 2.0 * float(t_dist.sf(abs(stat), dof)) if dof > 0 else np.nan
    return est, se, p
