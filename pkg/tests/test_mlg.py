"""Distributional checks of the multivariate log-gamma family.

The scipy ``loggamma`` distribution is the oracle for the univariate case:
``mu + v * log G`` with ``G ~ Gamma(alpha, rate=kappa)`` is an affine map of
a standard log-gamma variate, so densities, moments, and the KS statistic
all have independent reference values.
"""

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import polygamma, psi

from plpmlg.exceptions import (
    DegenerateDesignError,
    InvalidParameterError,
    TruncationFailureError,
)
from plpmlg.mlg import (
    CMLGParams,
    MLGParams,
    gaussian_limit_params,
    log_density_mlg,
    sample_cmlg,
    sample_cmlg_truncated_positive,
    sample_mlg,
)


def scalar_params(mu=0.5, v=2.0, alpha=1.5, kappa=0.7):
    return MLGParams(mu=np.array([mu]), V=np.array([[v]]),
                     alpha=np.array([alpha]), kappa=np.array([kappa]))


class TestMLGParams:
    def test_dim(self):
        assert scalar_params().dim == 1

    def test_singular_v_rejected(self):
        with pytest.raises(InvalidParameterError):
            MLGParams(mu=np.zeros(2), V=np.zeros((2, 2)),
                      alpha=np.ones(2), kappa=np.ones(2))

    def test_nonpositive_alpha_rejected(self):
        with pytest.raises(InvalidParameterError):
            scalar_params(alpha=0.0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidParameterError):
            MLGParams(mu=np.zeros(2), V=np.eye(2),
                      alpha=np.ones(3), kappa=np.ones(2))


def test_log_density_matches_scipy_loggamma():
    # Y = mu + v log G, G ~ Gamma(a, rate k)  <=>  loggamma(a), then the
    # affine map y = mu - v log k + v x
    p = scalar_params()
    ref = stats.loggamma(c=1.5, loc=0.5 - 2.0 * np.log(0.7), scale=2.0)
    for y in (-3.0, -0.5, 0.5, 1.3, 4.0):
        assert log_density_mlg(p, [y]) == pytest.approx(
            ref.logpdf(y), abs=1e-12)


def test_log_density_normalizes_by_quadrature():
    p = scalar_params()
    val, err = integrate.quad(lambda y: np.exp(log_density_mlg(p, [y])),
                              -40.0, 40.0, limit=200)
    assert err < 1e-9
    assert val == pytest.approx(1.0, abs=1e-8)


def test_log_density_shape_check():
    with pytest.raises(InvalidParameterError):
        log_density_mlg(scalar_params(), [0.0, 1.0])


def test_bivariate_density_change_of_variables():
    # with independent components the joint splits into the product of two
    # univariate densities after inverting the diagonal scale
    params = MLGParams(mu=np.array([1.0, -2.0]),
                       V=np.diag([2.0, 0.5]),
                       alpha=np.array([1.2, 3.0]),
                       kappa=np.array([0.5, 2.0]))
    a = stats.loggamma(c=1.2, loc=1.0 - 2.0 * np.log(0.5), scale=2.0)
    b = stats.loggamma(c=3.0, loc=-2.0 - 0.5 * np.log(2.0), scale=0.5)
    y = np.array([0.7, -1.4])
    assert log_density_mlg(params, y) == pytest.approx(
        a.logpdf(y[0]) + b.logpdf(y[1]), abs=1e-12)


def test_sample_mlg_moments():
    # E[Y] = mu + V (psi(alpha) - log kappa), Cov = V diag(psi'(alpha)) V'
    params = MLGParams(mu=np.array([1.0, -1.0]),
                       V=np.array([[2.0, 0.5], [0.0, 1.5]]),
                       alpha=np.array([2.0, 4.0]),
                       kappa=np.array([1.0, 3.0]))
    rng = np.random.default_rng(7)
    draws = np.array([sample_mlg(params, rng) for _ in range(40000)])
    mean_ref = params.mu + params.V @ (psi(params.alpha) - np.log(params.kappa))
    cov_ref = params.V @ np.diag(polygamma(1, params.alpha)) @ params.V.T
    se = np.sqrt(np.diag(cov_ref) / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - mean_ref) < 5 * se)
    assert np.allclose(np.cov(draws.T), cov_ref, rtol=0.08)


def test_sample_mlg_small_shape_finite():
    # shapes below one route through the shift identity; draws stay finite
    params = scalar_params(alpha=0.05, kappa=1.0)
    rng = np.random.default_rng(3)
    draws = np.array([sample_mlg(params, rng)[0] for _ in range(2000)])
    assert np.all(np.isfinite(draws))
    ref = stats.loggamma(c=0.05, loc=0.5, scale=2.0)
    assert stats.kstest(draws, ref.cdf).pvalue > 0.001


class TestCMLG:
    def test_tall_requirement(self):
        with pytest.raises(InvalidParameterError):
            CMLGParams(H=np.ones((1, 2)), alpha=np.ones(1), kappa=np.ones(1))

    def test_rank_deficient_rejected(self):
        H = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        with pytest.raises(DegenerateDesignError):
            CMLGParams(H=H, alpha=np.ones(3), kappa=np.ones(3))

    def test_square_invertible_is_exact_transform(self):
        # square H makes the projection an exact change of variables:
        # theta = H^{-1} w reproduces the solve at the same seed
        H = np.array([[2.0, 1.0], [0.5, 3.0]])
        alpha = np.array([1.5, 2.5])
        kappa = np.array([1.0, 0.5])
        params = CMLGParams(H=H, alpha=alpha, kappa=kappa)
        from plpmlg._kernels import log_gamma_draws

        theta = sample_cmlg(params, np.random.default_rng(11))
        w = log_gamma_draws(np.random.default_rng(11), alpha, kappa)
        assert np.allclose(theta, np.linalg.solve(H, w), atol=1e-12)

    def test_scalar_identity_matches_loggamma(self):
        # H = [[1]] reduces the density to exp(a t - k e^t): loggamma(a)
        # shifted by -log(k)
        params = CMLGParams(H=np.ones((1, 1)), alpha=np.array([2.0]),
                            kappa=np.array([3.0]))
        rng = np.random.default_rng(5)
        draws = np.array([sample_cmlg(params, rng)[0] for _ in range(4000)])
        ref = stats.loggamma(c=2.0, loc=-np.log(3.0))
        assert stats.kstest(draws, ref.cdf).pvalue > 0.001


class TestTruncatedPositive:
    def test_draws_positive(self):
        params = CMLGParams(H=np.ones((1, 1)), alpha=np.array([1.0]),
                            kappa=np.array([1.0]))
        rng = np.random.default_rng(1)
        for _ in range(50):
            assert sample_cmlg_truncated_positive(params, rng) > 0.0

    def test_vector_target_rejected(self):
        params = CMLGParams(H=np.eye(2), alpha=np.ones(2), kappa=np.ones(2))
        with pytest.raises(InvalidParameterError):
            sample_cmlg_truncated_positive(params, np.random.default_rng(0))

    def test_exhaustion_raises(self):
        # mean around psi(20) - log(1e9) = -17.8: the positive half line
        # carries essentially no mass
        params = CMLGParams(H=np.ones((1, 1)), alpha=np.array([20.0]),
                            kappa=np.array([1e9]))
        with pytest.raises(TruncationFailureError):
            sample_cmlg_truncated_positive(params, np.random.default_rng(2),
                                           max_attempts=50)


def test_gaussian_limit_moments():
    c = np.array([2.0, -1.0])
    V = np.array([[1.0, 0.3], [0.0, 0.8]])
    params = gaussian_limit_params(c, V, alpha=1000.0)
    rng = np.random.default_rng(9)
    draws = np.array([sample_mlg(params, rng) for _ in range(30000)])
    assert np.all(np.abs(draws.mean(axis=0) - c) < 0.05)
    assert np.allclose(np.cov(draws.T), V @ V.T, rtol=0.05)


def test_gaussian_limit_validation():
    with pytest.raises(InvalidParameterError):
        gaussian_limit_params(np.zeros(2), np.eye(2), alpha=-1.0)
