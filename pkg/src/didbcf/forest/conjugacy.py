"""Gaussian leaf conjugacy: integrated leaf likelihoods, leaf posteriors, and
the inverse-gamma noise update."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import gamma as gamma_dist


@dataclass(frozen=True)
class SuffStats:
    """Per-node residual sufficient statistics."""

    n: int
    sum_r: float
    sum_r2: float = 0.0

    @classmethod
    def from_residuals(cls, r) -> "SuffStats":
        r = np.asarray(r, dtype=float)
        return cls(n=r.size, sum_r=float(r.sum()), sum_r2=float(r @ r))

    def __add__(self, other: "SuffStats") -> "SuffStats":
        return SuffStats(self.n + other.n, self.sum_r + other.sum_r,
                         self.sum_r2 + other.sum_r2)


@dataclass
class NoiseModel:
    """Homoskedastic Gaussian noise with an inverse-gamma prior on sigma2."""

    sigma2: float
    nu: float = 3.0
    lam: float = 1.0

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")


def log_leaf_marginal(s: SuffStats, sigma2: float, tau_leaf: float) -> float:
    """Log integrated likelihood of a leaf's residuals under a N(0, tau_leaf)
    leaf prior, up to the shared per-observation Gaussian normalizer:

        0.5*log(sigma2 / (sigma2 + n*tau)) + tau*(sum r)^2 / (2*sigma2*(sigma2 + n*tau))
    """
    if sigma2 <= 0 or tau_leaf <= 0:
        raise ValueError("sigma2 and tau_leaf must be positive")
    return float(_log_marginal_vec(np.array([s.n], dtype=float),
                                   np.array([s.sum_r]), sigma2, tau_leaf)[0])


def _log_marginal_vec(n, sum_r, sigma2, tau_leaf):
    denom = sigma2 + n * tau_leaf
    return 0.5 * np.log(sigma2 / denom) + tau_leaf * sum_r**2 / (2.0 * sigma2 * denom)


def leaf_posterior(n, sum_r, sigma2: float, tau_leaf: float):
    """Posterior (mean, variance) of a leaf value given n residuals summing to
    sum_r: N(tau*sum_r/(sigma2 + n*tau), sigma2*tau/(sigma2 + n*tau))."""
    denom = sigma2 + np.asarray(n, dtype=float) * tau_leaf
    return tau_leaf * np.asarray(sum_r, dtype=float) / denom, sigma2 * tau_leaf / denom


def draw_sigma2(residuals, nu: float, lam: float, rng: np.random.Generator) -> float:
    """sigma2 ~ InverseGamma((nu + n)/2, (nu*lam + sum r^2)/2)."""
    if nu <= 0 or lam <= 0:
        raise ValueError("nu and lam must be positive")
    r = np.asarray(residuals, dtype=float)
    shape = 0.5 * (nu + r.size)
    rate = 0.5 * (nu * lam + float(r @ r))
    return rate / rng.gamma(shape)


def calibrate_noise_prior(y, design, nu: float = 3.0, q: float = 0.9) -> NoiseModel:
    """Pick lam so the prior puts probability q below a least-squares estimate
    of sigma2 (with an intercept prepended to the design)."""
    y = np.asarray(y, dtype=float)
    design = np.column_stack([np.ones(len(y)), np.asarray(design, dtype=float)])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = max(len(y) - rank, 1)
    sigma2_hat = float(resid @ resid) / dof
    sigma2_hat = max(sigma2_hat, 1e-12)
    # P(sigma2 <= sigma2_hat) = q under IG(nu/2, nu*lam/2)
    lam = 2.0 * sigma2_hat * gamma_dist.ppf(1.0 - q, a=nu / 2.0) / nu
    return NoiseModel(sigma2=sigma2_hat, nu=nu, lam=float(lam))
