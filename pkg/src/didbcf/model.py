"""Two-forest treatment-effect model for staggered-adoption panels.

The outcome is decomposed as

    y_it = a * baseline(d_i, t, x_it) + b1 * effect(x_it, k_it) * d_it + eps

on the standardized outcome scale, where `baseline` and `effect` are
sum-of-trees functions, d_i flags ever-treated units, k_it is event time, and
d_it is the treatment indicator. The effect term enters the likelihood only on
treated rows, so the model's treatment contribution is structurally zero
wherever d_it = 0. The scale a carries a N(0,1) prior updated over all rows;
b1 carries a N(0,1/2) prior updated over treated rows. The control-arm scale
b0 multiplies a structurally-zero regressor, is therefore unidentified, and is
held at its reference value 0; the reported per-draw effect (b1 - b0) * effect
then equals the realized effect exactly.

Fitting runs a grow-from-root warm-start phase on both forests and hands the
final state to a Metropolis-Hastings backfitting phase whose retained draws
form the posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .forest import (
    BackfitState,
    Forest,
    ForestConfig,
    calibrate_noise_prior,
    draw_leaf_scale,
    draw_sigma2,
    grow_tree,
    mh_tree_update,
)
from .panel import PanelDataset


class EstimationError(ValueError):
    """Model cannot be fit to the given panel."""


def default_mu_config() -> ForestConfig:
    return ForestConfig(num_trees=200, alpha=0.95, power=2.0,
                        leaf_prior="half-cauchy", anchor=2.0)


def default_tau_config() -> ForestConfig:
    return ForestConfig(num_trees=50, alpha=0.25, power=3.0,
                        leaf_prior="half-normal", anchor=1.0)


@dataclass
class DidBcfConfig:
    mu_forest: ForestConfig = field(default_factory=default_mu_config)
    tau_forest: ForestConfig = field(default_factory=default_tau_config)
    warm_start_sweeps: int = 40
    warm_start_discard: int = 15
    n_iterations: int = 2000
    n_burnin: int = 1000
    thin: int = 1
    seed: int = 0
    keep_all_rows: bool = False

    def __post_init__(self):
        if self.n_burnin >= self.n_iterations:
            raise ValueError("n_burnin must be smaller than n_iterations")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if self.warm_start_discard >= self.warm_start_sweeps:
            raise ValueError("warm_start_discard must be below warm_start_sweeps")

    @property
    def n_retained(self) -> int:
        return (self.n_iterations - self.n_burnin + self.thin - 1) // self.thin


@dataclass(frozen=True)
class ScaleParams:
    a: float
    b0: float
    b1: float


@dataclass
class PosteriorDraws:
    """Retained draws on the original outcome scale.

    `tau` holds the realized per-row effect (b1 - b0) * effect(x) for every
    treated row; the model's treatment contribution on untreated rows is
    identically zero in every draw. `tau_all` (optional) evaluates the effect
    function counterfactually on every row.
    """

    tau: np.ndarray              # (draws, n_treated)
    treated_rows: np.ndarray     # panel row index per tau column
    sigma2: np.ndarray           # (draws,)
    a: np.ndarray
    b0: np.ndarray
    b1: np.ndarray
    fitted_mean: np.ndarray      # (draws,) mean fitted outcome
    y_center: float
    y_scale: float
    n_rows: int
    tau_all: np.ndarray | None = None
    warm_start_sigma2: np.ndarray | None = None
    warm_start_discard: int = 0

    @property
    def n_draws(self) -> int:
        return self.tau.shape[0]


def model_features(panel: PanelDataset) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrices for the two forests.

    Baseline forest sees (ever-treated flag, calendar time, covariates).
    Effect forest sees (covariates, event time, undefined-event-time flag);
    the flag is a dedicated category for never-treated rows, whose event time
    has no ordering information.
    """
    ever = panel.ever_treated().astype(float)
    t = panel.calendar_time()
    k, defined = panel.event_times()
    x_mu = np.column_stack([ever, t, panel.x])
    x_tau = np.column_stack([panel.x, k, (~defined).astype(float)])
    return x_mu, x_tau


def draw_coefficient(regressor, target, sigma2: float, prior_var: float,
                     rng: np.random.Generator) -> float:
    """Conjugate draw for c in target = c * regressor + eps with c ~ N(0, prior_var).

    Empty (or identically zero) regressors reduce to a prior draw.
    """
    reg = np.asarray(regressor, dtype=float)
    tgt = np.asarray(target, dtype=float)
    precision = 1.0 / prior_var + float(reg @ reg) / sigma2
    mean = (float(reg @ tgt) / sigma2) / precision
    return float(rng.normal(mean, math.sqrt(1.0 / precision)))


def draw_scales(mu_fit, tau_fit, y, treated, sigma2: float,
                current: ScaleParams, rng: np.random.Generator) -> ScaleParams:
    """One conjugate pass over (a, b0, b1).

    a regresses y minus the treatment term on the baseline fit over all rows;
    b1 regresses the remaining residual on the effect fit over treated rows;
    b0 sees the control-arm treatment regressor, which is structurally zero,
    so its draw is the N(0, 1/2) prior.
    """
    y = np.asarray(y, dtype=float)
    treated = np.asarray(treated, dtype=bool)
    treat_term = np.zeros(len(y))
    treat_term[treated] = current.b1 * np.asarray(tau_fit, dtype=float)[treated]
    a = draw_coefficient(mu_fit, y - treat_term, sigma2, 1.0, rng)
    resid = y - a * np.asarray(mu_fit, dtype=float)
    b1 = draw_coefficient(np.asarray(tau_fit, dtype=float)[treated],
                          resid[treated], sigma2, 0.5, rng)
    b0 = draw_coefficient(np.zeros(int((~treated).sum())), resid[~treated],
                          sigma2, 0.5, rng)
    return ScaleParams(a=a, b0=b0, b1=b1)


def _safe(value: float, floor: float = 1e-8) -> float:
    return value if abs(value) > floor else math.copysign(floor, value or 1.0)


def fit_didbcf(panel: PanelDataset, config: DidBcfConfig | None = None) -> PosteriorDraws:
    """Fit the model and return retained posterior draws.

    Identical panel, config, and seed give identical draws.
    """
    if config is None:
        config = DidBcfConfig()
    rng = np.random.default_rng(config.seed)

    treated = panel.treated()
    n = panel.n_rows
    tr_idx = np.flatnonzero(treated)
    if tr_idx.size == 0:
        raise EstimationError("panel has no treated rows")
    if tr_idx.size == n:
        raise EstimationError("panel has no control rows")

    y_center = float(panel.y.mean())
    y_scale = float(panel.y.std())
    if y_scale == 0:
        raise EstimationError("outcome is constant")
    y = (panel.y - y_center) / y_scale

    x_mu, x_tau_full = model_features(panel)
    x_tau = x_tau_full[tr_idx]

    noise = calibrate_noise_prior(y, x_mu)
    mu_cfg, tau_cfg = config.mu_forest, config.tau_forest
    mu_forest = Forest.stumps(mu_cfg, x_mu.shape[1],
                              leaf_scale=math.sqrt(1.0 / mu_cfg.num_trees))
    tau_forest = Forest.stumps(tau_cfg, x_tau.shape[1],
                               leaf_scale=math.sqrt(1.0 / tau_cfg.num_trees))
    mu_state = BackfitState(mu_forest, x_mu)
    tau_state = BackfitState(tau_forest, x_tau)

    a, b0, b1 = 1.0, 0.0, 1.0
    y_tr = y[tr_idx]

    def treat_term() -> np.ndarray:
        term = np.zeros(n)
        term[tr_idx] = b1 * tau_state.total
        return term

    def update_leaf_scales() -> None:
        mu_forest.leaf_scale = draw_leaf_scale(
            mu_forest.leaf_values(), mu_cfg.leaf_prior, mu_cfg.anchor, rng)
        tau_forest.leaf_scale = draw_leaf_scale(
            tau_forest.leaf_values(), tau_cfg.leaf_prior, tau_cfg.anchor, rng)

    # Warm-start phase: grow-from-root sweeps over both forests, noise
    # variance redrawn after every tree.
    warm_sigma2 = np.zeros(config.warm_start_sweeps)
    for sweep in range(config.warm_start_sweeps):
        target_mu = (y - treat_term()) / _safe(a)
        sigma2_mu = noise.sigma2 / _safe(a) ** 2
        for i in range(mu_cfg.num_trees):
            partial = target_mu - mu_state.total + mu_state.fits[i]
            tree, row_leaf = grow_tree(x_mu, partial, mu_cfg, sigma2_mu,
                                       mu_forest.leaf_scale**2, rng,
                                       sorted_idx=mu_state.sorted_idx)
            mu_forest.trees[i] = tree
            mu_state.replace_tree(i, tree, row_leaf)
            full_resid = y - a * mu_state.total - treat_term()
            noise.sigma2 = draw_sigma2(full_resid, noise.nu, noise.lam, rng)
            sigma2_mu = noise.sigma2 / _safe(a) ** 2
        a = draw_coefficient(mu_state.total, y - treat_term(), noise.sigma2,
                             1.0, rng)

        resid_tr = (y_tr - a * mu_state.total[tr_idx]) / _safe(b1)
        sigma2_tau = noise.sigma2 / _safe(b1) ** 2
        for i in range(tau_cfg.num_trees):
            partial = resid_tr - tau_state.total + tau_state.fits[i]
            tree, row_leaf = grow_tree(x_tau, partial, tau_cfg, sigma2_tau,
                                       tau_forest.leaf_scale**2, rng,
                                       sorted_idx=tau_state.sorted_idx)
            tau_forest.trees[i] = tree
            tau_state.replace_tree(i, tree, row_leaf)
            full_resid = y - a * mu_state.total - treat_term()
            noise.sigma2 = draw_sigma2(full_resid, noise.nu, noise.lam, rng)
            sigma2_tau = noise.sigma2 / _safe(b1) ** 2
        b1 = draw_coefficient(tau_state.total,
                              y_tr - a * mu_state.total[tr_idx], noise.sigma2,
                              0.5, rng)
        update_leaf_scales()
        warm_sigma2[sweep] = noise.sigma2

    # Posterior phase: one grow-or-prune proposal per tree per iteration,
    # update order fixed as baseline trees, a, effect trees, b1, noise, scales.
    retained = config.n_retained
    tau_draws = np.zeros((retained, tr_idx.size))
    tau_all = np.zeros((retained, n)) if config.keep_all_rows else None
    sigma2_trace = np.zeros(retained)
    a_trace = np.zeros(retained)
    b0_trace = np.zeros(retained)
    b1_trace = np.zeros(retained)
    fitted_mean = np.zeros(retained)

    keep = 0
    for it in range(config.n_iterations):
        target_mu = (y - treat_term()) / _safe(a)
        sigma2_mu = noise.sigma2 / _safe(a) ** 2
        for i, tree in enumerate(mu_forest.trees):
            partial = target_mu - mu_state.total + mu_state.fits[i]
            mh_tree_update(tree, mu_state.row_leaf[i], x_mu, partial, mu_cfg,
                           sigma2_mu, mu_forest.leaf_scale**2, rng)
            mu_state.refresh_tree(i, tree)
        a = draw_coefficient(mu_state.total, y - treat_term(), noise.sigma2,
                             1.0, rng)

        resid_tr = (y_tr - a * mu_state.total[tr_idx]) / _safe(b1)
        sigma2_tau = noise.sigma2 / _safe(b1) ** 2
        for i, tree in enumerate(tau_forest.trees):
            partial = resid_tr - tau_state.total + tau_state.fits[i]
            mh_tree_update(tree, tau_state.row_leaf[i], x_tau, partial,
                           tau_cfg, sigma2_tau, tau_forest.leaf_scale**2, rng)
            tau_state.refresh_tree(i, tree)
        b1 = draw_coefficient(tau_state.total,
                              y_tr - a * mu_state.total[tr_idx], noise.sigma2,
                              0.5, rng)

        full_resid = y - a * mu_state.total - treat_term()
        noise.sigma2 = draw_sigma2(full_resid, noise.nu, noise.lam, rng)
        update_leaf_scales()

        if it >= config.n_burnin and (it - config.n_burnin) % config.thin == 0:
            tau_draws[keep] = (b1 - b0) * tau_state.total * y_scale
            if tau_all is not None:
                tau_all[keep] = (b1 - b0) * tau_forest.predict(x_tau_full) * y_scale
            sigma2_trace[keep] = noise.sigma2 * y_scale**2
            a_trace[keep] = a
            b0_trace[keep] = b0
            b1_trace[keep] = b1
            fitted = a * mu_state.total + treat_term()
            fitted_mean[keep] = float(fitted.mean()) * y_scale + y_center
            keep += 1

    return PosteriorDraws(
        tau=tau_draws,
        treated_rows=tr_idx,
        sigma2=sigma2_trace,
        a=a_trace,
        b0=b0_trace,
        b1=b1_trace,
        fitted_mean=fitted_mean,
        y_center=y_center,
        y_scale=y_scale,
        n_rows=n,
        tau_all=tau_all,
        warm_start_sigma2=warm_sigma2,
        warm_start_discard=config.warm_start_discard,
    )


def extract_tau_draws(draws: PosteriorDraws, rows) -> np.ndarray:
    """Draws-by-rows matrix of realized effects for the selected panel rows.

    Rows must be treated rows present in the fit unless the fit kept
    counterfactual draws for all rows.
    """
    rows = np.atleast_1d(np.asarray(rows, dtype=int))
    if rows.size and (rows.min() < 0 or rows.max() >= draws.n_rows):
        bad = rows[(rows < 0) | (rows >= draws.n_rows)][0]
        raise KeyError(f"row {bad} is outside the fitted panel")
    col = {int(r): i for i, r in enumerate(draws.treated_rows)}
    missing = [int(r) for r in rows if int(r) not in col]
    if not missing:
        return draws.tau[:, [col[int(r)] for r in rows]]
    if draws.tau_all is not None:
        return draws.tau_all[:, rows]
    raise KeyError(
        f"row {missing[0]} is not a treated row; refit with keep_all_rows for "
        "counterfactual draws")


def treatment_contribution(draws: PosteriorDraws, rows) -> np.ndarray:
    """Per-draw model treatment contribution for the selected rows: the
    realized effect on treated rows, exactly zero elsewhere."""
    rows = np.atleast_1d(np.asarray(rows, dtype=int))
    out = np.zeros((draws.n_draws, rows.size))
    col = {int(r): i for i, r in enumerate(draws.treated_rows)}
    for j, r in enumerate(rows):
        if int(r) in col:
            out[:, j] = draws.tau[:, col[int(r)]]
    return out
