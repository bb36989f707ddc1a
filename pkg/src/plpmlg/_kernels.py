"""Hot numeric kernels with jit-compiled and pure-numpy implementations.

Every kernel exists twice: a vectorized numpy version (suffix ``_np``) and a
numba ``@njit`` loop version. Both consume random variates from a
``numpy.random.Generator`` in exactly the same order, so the draw kernels
produce bitwise-identical streams on either backend; reduction kernels agree
to floating-point summation order.

The public, unsuffixed names dispatch to the jitted versions when numba is
importable and the environment variable ``PLPMLG_DISABLE_NUMBA`` is unset or
falsy, and to the numpy versions otherwise. ``BACKEND`` records the choice.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.special import gammaln

__all__ = [
    "BACKEND",
    "HAVE_NUMBA",
    "log_gamma_draws",
    "weighted_poisson_loglik",
    "sigma_psi_grad",
    "count_model_area_sums",
    "lognormal_model_area_sums",
]


def _numba_disabled() -> bool:
    value = os.environ.get("PLPMLG_DISABLE_NUMBA", "").strip().lower()
    return value not in ("", "0", "false", "no", "off")


HAVE_NUMBA = False
if not _numba_disabled():
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def log_gamma_draws_np(rng, shape, rate, out=None):
    """Draw ``log(G)`` with ``G ~ Gamma(shape, rate)`` elementwise.

    Shapes below one are handled with the shift identity
    ``log G(a) = log G(a + 1) + log(U) / a`` so that tiny shapes do not
    underflow to ``log(0)``. Draw order is: one gamma variate per element,
    then one uniform per element whose shape is below one.

    Parameters
    ----------
    rng : numpy.random.Generator
        Source of randomness.
    shape, rate : ndarray
        Positive arrays of equal length.
    out : ndarray, optional
        Preallocated output buffer.

    Returns
    -------
    ndarray
        Logged gamma variates, same length as ``shape``.
    """
    shape = np.asarray(shape, dtype=np.float64)
    rate = np.asarray(rate, dtype=np.float64)
    small = shape < 1.0
    lifted = np.where(small, shape + 1.0, shape)
    g = rng.gamma(lifted, 1.0 / rate)
    res = np.log(g, out=out)
    if small.any():
        u = rng.random(int(small.sum()))
        res[small] += np.log(u) / shape[small]
    return res


def weighted_poisson_loglik_np(z, log_lam, w):
    """Weighted Poisson log likelihood sum(w * log Pois(z | exp(log_lam)))."""
    z = np.asarray(z, dtype=np.float64)
    terms = z * log_lam - np.exp(log_lam) - gammaln(z + 1.0)
    return float(np.dot(w, terms))


def sigma_psi_grad_np(s, x, alpha, lin, rho, n_log):
    """Log kernel and derivative of a precision-like scalar conditional.

    The kernel is ``n_log*log(s) + lin*s - alpha*sum_j exp(b*x_j*s) - rho*e^s``
    with ``b = alpha**-0.5``; it is strictly concave on ``s > 0``.
    """
    b = alpha ** -0.5
    e = np.exp(b * s * x)
    psi = lin * s - alpha * float(e.sum()) - rho * math.exp(s)
    grad = lin - alpha * b * float(np.dot(x, e)) - rho * math.exp(s)
    if n_log > 0.0:
        psi += n_log * math.log(s)
        grad += n_log / s
    return psi, grad


def count_model_area_sums_np(rng, base_log_intensity, area_codes, n_areas,
                             sqrt_alpha_sigma, alpha, fresh_unit_effect,
                             vacancy):
    """Simulate unit counts for one posterior draw and sum by area.

    Each unit's log intensity is ``base_log_intensity`` plus, when
    ``fresh_unit_effect`` is set, a unit-effect draw
    ``sqrt_alpha_sigma * log(G)`` with ``G ~ Gamma(alpha, rate=alpha)``. A
    Poisson count is drawn per unit; the returned vector holds per-area sums
    of the count, or of the indicator that the count is zero when ``vacancy``.
    """
    if fresh_unit_effect:
        g = rng.gamma(alpha, 1.0 / alpha, size=base_log_intensity.size)
        log_lam = base_log_intensity + sqrt_alpha_sigma * np.log(g)
    else:
        log_lam = base_log_intensity
    z = rng.poisson(np.exp(log_lam))
    vals = (z == 0).astype(np.float64) if vacancy else z.astype(np.float64)
    return np.bincount(area_codes, weights=vals, minlength=n_areas)


def lognormal_model_area_sums_np(rng, mean_log, area_codes, n_areas, sd_log,
                                 shift, predictive_noise, vacancy):
    """Back-transformed lognormal predictions for one draw, summed by area.

    Predictions are ``max(0, exp(v) - shift)`` where ``v`` is ``mean_log``
    plus optional Gaussian noise with standard deviation ``sd_log``. With
    ``vacancy`` the per-area sums count units whose prediction is zero.
    """
    if predictive_noise:
        v = mean_log + sd_log * rng.standard_normal(mean_log.size)
    else:
        v = mean_log
    pred = np.exp(v) - shift
    np.maximum(pred, 0.0, out=pred)
    vals = (pred == 0.0).astype(np.float64) if vacancy else pred
    return np.bincount(area_codes, weights=vals, minlength=n_areas)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _log_gamma_draws_jit(rng, shape, rate, out):
        n = shape.size
        for i in range(n):
            a = shape[i]
            if a < 1.0:
                a = a + 1.0
            out[i] = np.log(rng.gamma(a, 1.0 / rate[i]))
        for i in range(n):
            if shape[i] < 1.0:
                out[i] += np.log(rng.random()) / shape[i]
        return out

    @njit(cache=True)
    def _weighted_poisson_loglik_jit(z, log_lam, w):
        total = 0.0
        for i in range(z.size):
            total += w[i] * (z[i] * log_lam[i] - np.exp(log_lam[i])
                             - math.lgamma(z[i] + 1.0))
        return total

    @njit(cache=True)
    def _sigma_psi_grad_jit(s, x, alpha, lin, rho, n_log):
        b = alpha ** -0.5
        sum_e = 0.0
        sum_xe = 0.0
        for j in range(x.size):
            e = math.exp(b * s * x[j])
            sum_e += e
            sum_xe += x[j] * e
        tail = rho * math.exp(s)
        psi = lin * s - alpha * sum_e - tail
        grad = lin - alpha * b * sum_xe - tail
        if n_log > 0.0:
            psi += n_log * math.log(s)
            grad += n_log / s
        return psi, grad

    @njit(cache=True)
    def _count_model_area_sums_jit(rng, base_log_intensity, area_codes,
                                   n_areas, sqrt_alpha_sigma, alpha,
                                   fresh_unit_effect, vacancy, out):
        n = base_log_intensity.size
        log_lam = np.empty(n)
        if fresh_unit_effect:
            inv_alpha = 1.0 / alpha
            for i in range(n):
                g = rng.gamma(alpha, inv_alpha)
                log_lam[i] = base_log_intensity[i] + sqrt_alpha_sigma * np.log(g)
        else:
            for i in range(n):
                log_lam[i] = base_log_intensity[i]
        out[:] = 0.0
        for i in range(n):
            z = rng.poisson(np.exp(log_lam[i]))
            if vacancy:
                if z == 0:
                    out[area_codes[i]] += 1.0
            else:
                out[area_codes[i]] += z
        return out

    @njit(cache=True)
    def _lognormal_model_area_sums_jit(rng, mean_log, area_codes, n_areas,
                                       sd_log, shift, predictive_noise,
                                       vacancy, out):
        out[:] = 0.0
        for i in range(mean_log.size):
            v = mean_log[i]
            if predictive_noise:
                v += sd_log * rng.standard_normal()
            pred = math.exp(v) - shift
            if pred < 0.0:
                pred = 0.0
            if vacancy:
                if pred == 0.0:
                    out[area_codes[i]] += 1.0
            else:
                out[area_codes[i]] += pred
        return out

    def log_gamma_draws_nb(rng, shape, rate, out=None):
        shape = np.asarray(shape, dtype=np.float64)
        rate = np.asarray(rate, dtype=np.float64)
        if out is None:
            out = np.empty(shape.size)
        return _log_gamma_draws_jit(rng, shape, rate, out)

    def weighted_poisson_loglik_nb(z, log_lam, w):
        return float(_weighted_poisson_loglik_jit(
            np.asarray(z, dtype=np.float64), log_lam, w))

    def sigma_psi_grad_nb(s, x, alpha, lin, rho, n_log):
        return _sigma_psi_grad_jit(s, x, alpha, lin, rho, n_log)

    def count_model_area_sums_nb(rng, base_log_intensity, area_codes, n_areas,
                                 sqrt_alpha_sigma, alpha, fresh_unit_effect,
                                 vacancy):
        out = np.empty(n_areas)
        return _count_model_area_sums_jit(
            rng, base_log_intensity, area_codes, n_areas, sqrt_alpha_sigma,
            alpha, fresh_unit_effect, vacancy, out)

    def lognormal_model_area_sums_nb(rng, mean_log, area_codes, n_areas,
                                     sd_log, shift, predictive_noise, vacancy):
        out = np.empty(n_areas)
        return _lognormal_model_area_sums_jit(
            rng, mean_log, area_codes, n_areas, sd_log, shift,
            predictive_noise, vacancy, out)

    log_gamma_draws = log_gamma_draws_nb
    weighted_poisson_loglik = weighted_poisson_loglik_nb
    sigma_psi_grad = sigma_psi_grad_nb
    count_model_area_sums = count_model_area_sums_nb
    lognormal_model_area_sums = lognormal_model_area_sums_nb
else:
    log_gamma_draws = log_gamma_draws_np
    weighted_poisson_loglik = weighted_poisson_loglik_np
    sigma_psi_grad = sigma_psi_grad_np
    count_model_area_sums = count_model_area_sums_np
    lognormal_model_area_sums = lognormal_model_area_sums_np
