import math

import numpy as np
import pytest
from scipy import integrate

from didbcf.forest import (
    NoiseModel,
    SuffStats,
    calibrate_noise_prior,
    draw_sigma2,
    leaf_posterior,
    log_leaf_marginal,
)


def marginal_by_quadrature(n, sum_r, sum_r2, sigma2, tau):
    """Integrate prod_i N(r_i; mu, sigma2) N(mu; 0, tau) dmu, then divide by
    the shared per-observation normalizer the closed form drops. The peak of
    the log integrand is factored out so the quadrature never underflows."""
    def log_f(mu):
        log_lik = -0.5 * n * math.log(2 * math.pi * sigma2) \
            - (sum_r2 - 2 * mu * sum_r + n * mu**2) / (2 * sigma2)
        log_prior = -0.5 * math.log(2 * math.pi * tau) - mu**2 / (2 * tau)
        return log_lik + log_prior

    peak = log_f(tau * sum_r / (sigma2 + n * tau))
    value, _ = integrate.quad(lambda mu: math.exp(log_f(mu) - peak), -60, 60,
                              limit=400)
    # the closed form drops the per-observation normalizer and the residual
    # quadratic term, which cancel in likelihood ratios
    log_norm = -0.5 * n * math.log(2 * math.pi * sigma2) - sum_r2 / (2 * sigma2)
    return peak + math.log(value) - log_norm


class TestLogLeafMarginal:
    def test_empty_leaf_is_zero(self):
        assert log_leaf_marginal(SuffStats(0, 0.0), 1.0, 1.0) == 0.0

    def test_single_zero_residual(self):
        value = log_leaf_marginal(SuffStats(1, 0.0, 0.0), 1.0, 1.0)
        assert value == pytest.approx(0.5 * math.log(0.5), abs=1e-12)
        assert value == pytest.approx(-0.34657, abs=1e-5)

    def test_two_residuals(self):
        # frozen from the quadrature oracle: 0.5*log(1/3) + 4/6 = 0.1173605
        value = log_leaf_marginal(SuffStats(2, 2.0, 2.0), 1.0, 1.0)
        assert value == pytest.approx(0.5 * math.log(1 / 3) + 4 / 6, abs=1e-12)
        assert value == pytest.approx(
            marginal_by_quadrature(2, 2.0, 2.0, 1.0, 1.0), abs=1e-9)
        assert value == pytest.approx(0.1173605, abs=1e-6)

    def test_against_quadrature_on_random_tuples(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            n = int(rng.integers(1, 12))
            r = rng.normal(scale=2.0, size=n)
            sigma2 = float(rng.uniform(0.2, 3.0))
            tau = float(rng.uniform(0.2, 3.0))
            s = SuffStats.from_residuals(r)
            oracle = marginal_by_quadrature(n, s.sum_r, s.sum_r2, sigma2, tau)
            assert log_leaf_marginal(s, sigma2, tau) == pytest.approx(
                oracle, abs=1e-6)

    def test_rejects_nonpositive_variances(self):
        with pytest.raises(ValueError):
            log_leaf_marginal(SuffStats(1, 0.0), 0.0, 1.0)
        with pytest.raises(ValueError):
            log_leaf_marginal(SuffStats(1, 0.0), 1.0, -1.0)


class TestLeafPosterior:
    def test_no_data_is_prior(self):
        mean, var = leaf_posterior(0, 0.0, 1.0, 2.5)
        assert mean == 0.0
        assert var == pytest.approx(2.5)

    def test_vanishing_noise_recovers_mean(self):
        mean, _ = leaf_posterior(4, 8.0, 1e-8, 1.0)
        assert mean == pytest.approx(2.0, abs=1e-4)

    def test_closed_form_point(self):
        mean, var = leaf_posterior(4, 8.0, 1.0, 1.0)
        assert mean == pytest.approx(8 / 5)
        assert var == pytest.approx(1 / 5)

    def test_sample_moments(self):
        rng = np.random.default_rng(0)
        mean, var = leaf_posterior(4, 8.0, 1.0, 1.0)
        draws = rng.normal(mean, math.sqrt(var), size=10_000)
        se_mean = math.sqrt(var / draws.size)
        assert abs(draws.mean() - mean) < 3 * se_mean
        se_var = var * math.sqrt(2 / (draws.size - 1))
        assert abs(draws.var() - var) < 3 * se_var

    def test_moments_match_quadrature(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            n = int(rng.integers(0, 9))
            sum_r = float(rng.normal(scale=3.0))
            sigma2 = float(rng.uniform(0.3, 2.0))
            tau = float(rng.uniform(0.3, 2.0))
            mean, var = leaf_posterior(n, sum_r, sigma2, tau)

            def posterior_density(mu):
                return math.exp(-(n * mu**2 - 2 * mu * sum_r) / (2 * sigma2)
                                - mu**2 / (2 * tau))

            z, _ = integrate.quad(posterior_density, -50, 50, limit=300)
            m1, _ = integrate.quad(lambda u: u * posterior_density(u), -50, 50,
                                   limit=300)
            m2, _ = integrate.quad(lambda u: u * u * posterior_density(u), -50,
                                   50, limit=300)
            assert mean == pytest.approx(m1 / z, abs=1e-6)
            assert var == pytest.approx(m2 / z - (m1 / z) ** 2, abs=1e-6)


class TestDrawSigma2:
    def test_posterior_mean_matches_closed_form(self):
        # nu=3, lam=1, n=20, sum r^2 = 10 -> IG(11.5, 6.5), mean 6.5/10.5
        rng = np.random.default_rng(1)
        r = np.zeros(20)
        r[0] = math.sqrt(10.0)
        draws = np.array([draw_sigma2(r, 3.0, 1.0, rng) for _ in range(10_000)])
        mean = 6.5 / 10.5
        var = 6.5**2 / (10.5**2 * 9.5)
        assert abs(draws.mean() - mean) < 3 * math.sqrt(var / draws.size)

    def test_zero_residuals_reduce_rate(self):
        rng = np.random.default_rng(2)
        draws = np.array([draw_sigma2(np.zeros(20), 3.0, 1.0, rng)
                          for _ in range(10_000)])
        mean = 1.5 / 10.5  # IG(11.5, 1.5)
        assert abs(draws.mean() - mean) < 0.01

    def test_no_data_is_prior_draw(self):
        rng = np.random.default_rng(3)
        draws = np.array([draw_sigma2(np.empty(0), 5.0, 2.0, rng)
                          for _ in range(20_000)])
        # prior IG(2.5, 5): mean 5/1.5
        assert abs(draws.mean() - 5 / 1.5) < 0.15


class TestCalibration:
    def test_prior_mass_below_ls_estimate(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(200, 3))
        y = x @ np.array([1.0, -1.0, 0.5]) + rng.normal(size=200)
        noise = calibrate_noise_prior(y, x, nu=3.0, q=0.9)
        # verify P(sigma2 <= sigma2_hat) = 0.9 by simulation from the prior
        prior_draws = np.array([draw_sigma2(np.empty(0), noise.nu, noise.lam,
                                            rng) for _ in range(20_000)])
        frac = (prior_draws <= noise.sigma2).mean()
        assert abs(frac - 0.9) < 0.01

    def test_noise_model_validates(self):
        with pytest.raises(ValueError):
            NoiseModel(sigma2=0.0)
