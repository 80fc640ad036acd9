"""Seeded generators for the five simulation designs under three outcome settings.

Each generator emits the observed panel plus per-row ground truth (true effect
and untreated-outcome mean). All randomness flows from the config seed through
a single Generator with a fixed draw order (covariates, then assignment, then
noise), so identical configs give bit-identical output.

The nonlinear-settings covariate transform map is frozen in
docs/transform_map.md: with p covariates and half = p // 2, the exp block is
the first ceil(half/2) columns, the square block the rest of the first half;
under setting 3 the second half splits again at ceil((p - half)/2) into an
|.| block and a sqrt|.| block (under setting 2 the second half stays linear).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .panel import NEVER, PanelDataset, build_panel

BETA_X_7 = np.array([-0.75, 0.5, -0.5, -1.30, 1.8, 2.5, -1.0])
BETA_X_8 = np.array([-0.75, 0.5, -0.5, -1.30, 1.8, 2.5, -1.0, 0.3])

CATEGORY_VALUES = np.array([1.0, 2.0, 3.0, 4.0])
CATEGORY_PROBS = np.array([0.3, 0.1, 0.2, 0.4])

# Latent-utility coefficients (intercept, on x1, on x8) per timing group; the
# baseline never-treated alternative has utility 0.
UTILITY_COEFS = np.array([
    [0.0, 0.0, 0.0],
    [0.1, 0.8, 0.6],
    [0.0, -0.5, -0.7],
    [0.1, 0.3, 0.4],
])

PROPENSITY_THETA = (0.0, 0.5, -0.5)   # intercept, on x1, on x7
SIGMA_PROP = 0.5


class DgpConfigError(ValueError):
    """Invalid generator configuration."""


@dataclass(frozen=True)
class DgpConfig:
    dgp_id: int
    setting: int
    n_units: int = 200
    n_periods: int = 8
    n_pre: int = 4
    sigma_eps: float = 1.0
    tau_override: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.dgp_id not in (1, 2, 3, 4, 5):
            raise DgpConfigError(f"dgp_id must be 1..5, got {self.dgp_id}")
        if self.setting not in (1, 2, 3):
            raise DgpConfigError(f"setting must be 1..3, got {self.setting}")
        if self.n_pre >= self.n_periods:
            raise DgpConfigError("n_pre must be smaller than n_periods")
        if self.n_units % 2:
            raise DgpConfigError("n_units must be even")


@dataclass(frozen=True)
class DgpCoefficients:
    beta_x: np.ndarray
    tau_base: float
    utility_coefs: np.ndarray = field(default_factory=lambda: UTILITY_COEFS.copy())
    propensity_theta: tuple = PROPENSITY_THETA
    sigma_prop: float = SIGMA_PROP


@dataclass(frozen=True)
class TruthRecord:
    """Row-aligned ground truth emitted next to the observed panel."""

    tau: np.ndarray        # true effect, 0 wherever D_it = 0
    baseline: np.ndarray   # E[Y_it(0)]
    adoption: np.ndarray   # per-row adoption time (NEVER for never-treated)
    treated: np.ndarray    # D_it


def coefficients_for(dgp_id: int, setting: int) -> DgpCoefficients:
    beta = BETA_X_7 if dgp_id in (1, 2) else BETA_X_8
    tau_base = 5.0 if setting == 3 else 3.0
    return DgpCoefficients(beta_x=beta.copy(), tau_base=tau_base)


def _quarter_slices(p: int):
    half = p // 2
    q1_end = (half + 1) // 2
    q3_end = half + (p - half + 1) // 2
    return slice(0, q1_end), slice(q1_end, half), slice(half, q3_end), slice(q3_end, p)


def _covariate_terms(setting: int, x: np.ndarray, beta: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    if setting == 1:
        return x @ beta
    exp_s, sq_s, abs_s, sqrt_s = _quarter_slices(x.shape[1])
    out = np.exp(x[:, exp_s]) @ beta[exp_s] + (x[:, sq_s] ** 2) @ beta[sq_s]
    if setting == 2:
        lin = slice(abs_s.start, x.shape[1])
        return out + x[:, lin] @ beta[lin]
    out += np.abs(x[:, abs_s]) @ beta[abs_s]
    out += np.sqrt(np.abs(x[:, sqrt_s])) @ beta[sqrt_s]
    return out


def baseline_mean(setting: int, ever_treated, t, x, coeffs: DgpCoefficients):
    """Untreated-outcome mean E[Y_it(0)] under the given setting.

    Accepts scalars or row-aligned arrays; covariate vectors must match the
    coefficient length.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != len(coeffs.beta_x):
        raise ValueError("covariate dimension does not match coefficients")
    t = np.asarray(t, dtype=float)
    ever = np.asarray(ever_treated, dtype=float)
    trend = 0.2 * t**2 if setting == 3 else 0.2 * t
    out = -0.5 + 0.75 * ever + trend + _covariate_terms(setting, x, coeffs.beta_x)
    return out if out.size > 1 else float(out[0])


def true_tau(dgp_id: int, setting: int, x, k: float, k_defined: bool,
             coeffs: DgpCoefficients, tau_override: float | None = None) -> float:
    """True effect for one cell: 0 pre-treatment, the CATE map otherwise."""
    if not k_defined or k < 0:
        return 0.0
    if tau_override is not None:
        return float(tau_override)
    if dgp_id in (1, 2, 3):
        return coeffs.tau_base
    x = np.asarray(x, dtype=float)
    if dgp_id == 4:
        key, modifier = x[7], np.sqrt(abs(x[2]))
    else:
        key, modifier = x[2], np.sqrt(abs(x[3]))
    if key in (1.0, 3.0):
        return coeffs.tau_base + 1.5 * modifier
    if key == 2.0:
        return coeffs.tau_base
    return coeffs.tau_base - 0.5 * modifier


def _tau_vector(dgp_id, setting, x, k, defined, coeffs, override):
    post = defined & (k >= 0)
    tau = np.zeros(len(k))
    if override is not None:
        tau[post] = override
        return tau
    if dgp_id in (1, 2, 3):
        tau[post] = coeffs.tau_base
        return tau
    if dgp_id == 4:
        key, modifier = x[:, 7], np.sqrt(np.abs(x[:, 2]))
    else:
        key, modifier = x[:, 2], np.sqrt(np.abs(x[:, 3]))
    shift = np.where(np.isin(key, (1.0, 3.0)), 1.5 * modifier,
                     np.where(key == 2.0, 0.0, -0.5 * modifier))
    tau[post] = coeffs.tau_base + shift[post]
    return tau


def _draw_covariates(dgp_id, n_units, n_periods, rng):
    """Per-column draws over the (unit, period) grid; static columns are
    drawn once per unit and repeated across periods."""
    u, t = n_units, n_periods

    def bern(prob, static=False):
        if static:
            return np.repeat(rng.uniform(size=u) < prob, t).astype(float)
        return (rng.uniform(size=(u, t)) < prob).ravel().astype(float)

    def normal(static=False):
        if static:
            return np.repeat(rng.standard_normal(u), t)
        return rng.standard_normal((u, t)).ravel()

    def categorical(static=False):
        size = u if static else (u, t)
        draws = CATEGORY_VALUES[rng.choice(4, size=size, p=CATEGORY_PROBS)]
        return np.repeat(draws, t) if static else draws.ravel()

    if dgp_id in (1, 2):
        cols = [bern(0.66), normal(), normal(), normal(), normal(), normal(),
                categorical()]
    elif dgp_id in (3, 5):
        cols = [bern(0.66, static=True), bern(0.45), categorical(), normal(),
                normal(), normal(), normal(), normal(static=True)]
    else:  # dgp 4
        cols = [bern(0.66, static=True), bern(0.45), normal(), normal(),
                normal(), normal(), normal(static=True), categorical()]
    return np.column_stack(cols)


def _assign_adoption(config: DgpConfig, x_static_by_unit, rng) -> np.ndarray:
    """Per-unit calendar adoption times (NEVER for never-treated)."""
    u = config.n_units
    t0 = float(config.n_pre)
    if config.dgp_id == 1:
        perm = rng.permutation(u)
        g = np.full(u, NEVER)
        g[perm[: u // 2]] = t0
        return g
    if config.dgp_id == 2:
        perm = rng.permutation(u)
        g = np.full(u, NEVER)
        for i, block in enumerate(np.array_split(perm, 4)):
            if i > 0:
                g[block] = t0 + (i - 1)
        return g
    if config.dgp_id == 4:
        theta0, theta1, theta7 = PROPENSITY_THETA
        logit = theta0 + theta1 * x_static_by_unit[:, 0] + theta7 * x_static_by_unit[:, 1]
        pi = 1.0 / (1.0 + np.exp(-logit))
        treated = rng.uniform(size=u) < pi
        g = np.full(u, NEVER)
        g[treated] = t0
        return g
    # dgp 3 / 5: latent-utility maximization over the four timing alternatives
    v = (UTILITY_COEFS[:, 0][None, :]
         + np.outer(x_static_by_unit[:, 0], UTILITY_COEFS[:, 1])
         + np.outer(x_static_by_unit[:, 1], UTILITY_COEFS[:, 2]))
    utilities = v + rng.normal(scale=SIGMA_PROP, size=(u, 4))
    choice = np.argmax(utilities, axis=1)  # ties break to the smallest index
    g = np.full(u, NEVER)
    for grp in (1, 2, 3):
        g[choice == grp] = t0 + (grp - 1)
    return g


def simulate_dgp(config: DgpConfig) -> tuple[PanelDataset, TruthRecord]:
    """Generate one balanced panel plus ground truth.

    Times run 0..n_periods-1 so the earliest adoption time equals n_pre and
    splits the panel into n_pre pre- and n_periods - n_pre post-periods.
    """
    rng = np.random.default_rng(config.seed)
    coeffs = coefficients_for(config.dgp_id, config.setting)
    u, t = config.n_units, config.n_periods

    x = _draw_covariates(config.dgp_id, u, t, rng)

    # Static assignment covariates: (x1, x8) for utilities, (x1, x7) for the
    # propensity design. Static columns are constant within unit, so row 0 of
    # each unit's block carries the unit value.
    first_rows = np.arange(u) * t
    if config.dgp_id in (3, 5):
        static = x[first_rows][:, [0, 7]]
    elif config.dgp_id == 4:
        static = x[first_rows][:, [0, 6]]
    else:
        static = x[first_rows][:, :2]  # unused
    adoption_by_unit = _assign_adoption(config, static, rng)

    unit_labels = np.repeat(np.arange(u), t)
    time_values = np.tile(np.arange(t), u)
    adoption_by_row = adoption_by_unit[unit_labels]
    ever = np.isfinite(adoption_by_row)
    defined = ever
    k = np.where(defined, time_values - adoption_by_row, 0.0)
    d_it = defined & (k >= 0)

    baseline = baseline_mean(config.setting, ever, time_values, x, coeffs)
    tau = _tau_vector(config.dgp_id, config.setting, x, k, defined, coeffs,
                      config.tau_override)
    eps = rng.standard_normal(u * t) * config.sigma_eps
    y = baseline + tau * d_it + eps

    panel = build_panel(unit_labels, time_values, y, x, adoption_by_row)
    truth = TruthRecord(tau=tau * d_it, baseline=np.asarray(baseline),
                        adoption=adoption_by_row, treated=d_it)
    return panel, truth


def write_truth(truth: TruthRecord, panel: PanelDataset, path) -> None:
    """Truth CSV aligned with the panel rows (unit, time, tau, baseline)."""
    import csv

    t_row = panel.calendar_time()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "time", "tau", "baseline", "treated"])
        for i in range(panel.n_rows):
            writer.writerow([
                panel.units[panel.unit_idx[i]], int(t_row[i]),
                repr(float(truth.tau[i])), repr(float(truth.baseline[i])),
                int(truth.treated[i]),
            ])
