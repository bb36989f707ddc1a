"""Multivariate log-gamma distributions.

The multivariate log-gamma family is built from a vector of independent
logged gamma variates: ``Y = mu + V @ log(G)`` with ``G_i ~ Gamma(alpha_i,
rate=kappa_i)``. Its conditional form arises when a log-gamma random vector
is observed through a tall constraint matrix; sampling that form reduces to
a least-squares projection. Large equal shape and rate parameters recover a
Gaussian in the limit, which is how diffuse normal-like priors are encoded
while keeping gamma-type conjugacy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.special import gammaln

from ._kernels import log_gamma_draws
from .exceptions import (
    DegenerateDesignError,
    InvalidParameterError,
    TruncationFailureError,
)

__all__ = [
    "MLGParams",
    "CMLGParams",
    "sample_mlg",
    "log_density_mlg",
    "sample_cmlg",
    "sample_cmlg_truncated_positive",
    "gaussian_limit_params",
]


def _as_positive_vector(x, name: str) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.ndim != 1:
        raise InvalidParameterError(f"{name} must be a vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError(f"{name} must be finite")
    if np.any(x <= 0.0):
        raise InvalidParameterError(f"{name} must be strictly positive")
    return x


@dataclass(frozen=True)
class MLGParams:
    """Parameters of a multivariate log-gamma distribution.

    Parameters
    ----------
    mu : ndarray, shape (m,)
        Location vector.
    V : ndarray, shape (m, m)
        Invertible scale matrix.
    alpha : ndarray, shape (m,)
        Positive shape parameters.
    kappa : ndarray, shape (m,)
        Positive rate parameters.
    """

    mu: np.ndarray
    V: np.ndarray
    alpha: np.ndarray
    kappa: np.ndarray
    _lu: tuple = field(init=False, repr=False, compare=False)
    _log_norm_const: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        V = np.asarray(self.V, dtype=np.float64)
        alpha = _as_positive_vector(self.alpha, "alpha")
        kappa = _as_positive_vector(self.kappa, "kappa")
        m = mu.shape[0]
        if mu.ndim != 1 or not np.all(np.isfinite(mu)):
            raise InvalidParameterError("mu must be a finite vector")
        if V.shape != (m, m):
            raise InvalidParameterError(
                f"V must have shape ({m}, {m}), got {V.shape}")
        if not np.all(np.isfinite(V)):
            raise InvalidParameterError("V must be finite")
        if alpha.shape[0] != m or kappa.shape[0] != m:
            raise InvalidParameterError("mu, alpha and kappa must share a length")
        sign, log_abs_det = np.linalg.slogdet(V)
        if sign == 0.0 or not np.isfinite(log_abs_det):
            raise InvalidParameterError("scale matrix V is singular or its "
                                        "determinant magnitude underflows")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "_lu", lu_factor(V))
        # constant part of the log density: -log|det V| + sum(a log k - lgamma(a))
        const = -log_abs_det + float(
            np.sum(alpha * np.log(kappa) - gammaln(alpha)))
        object.__setattr__(self, "_log_norm_const", const)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def sample_mlg(params: MLGParams, rng: np.random.Generator) -> np.ndarray:
    """Draw one vector from a multivariate log-gamma distribution."""
    g = log_gamma_draws(rng, params.alpha, params.kappa)
    return params.mu + params.V @ g


def log_density_mlg(params: MLGParams, y) -> float:
    """Exact log density of a multivariate log-gamma distribution at ``y``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != params.mu.shape:
        raise InvalidParameterError(
            f"y must have shape {params.mu.shape}, got {y.shape}")
    x = lu_solve(params._lu, y - params.mu)
    return params._log_norm_const + float(
        np.dot(params.alpha, x) - np.dot(params.kappa, np.exp(x)))


@dataclass(frozen=True)
class CMLGParams:
    """Parameters of a conditional multivariate log-gamma distribution.

    The density on ``theta`` in ``R^r`` is proportional to
    ``exp(alpha' H theta - kappa' exp(H theta))`` for a tall constraint
    matrix ``H`` of full column rank.
    """

    H: np.ndarray
    alpha: np.ndarray
    kappa: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=np.float64)
        alpha = _as_positive_vector(self.alpha, "alpha")
        kappa = _as_positive_vector(self.kappa, "kappa")
        if H.ndim != 2:
            raise InvalidParameterError("H must be a matrix")
        if not np.all(np.isfinite(H)):
            raise InvalidParameterError("H must be finite")
        big_n, r = H.shape
        if big_n < r:
            raise InvalidParameterError(
                f"H must be tall, got shape {H.shape}")
        if alpha.shape[0] != big_n or kappa.shape[0] != big_n:
            raise InvalidParameterError("alpha and kappa must match H rows")
        if np.linalg.matrix_rank(H) < r:
            raise DegenerateDesignError("constraint matrix H is rank deficient")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "kappa", kappa)

    @property
    def dim(self) -> int:
        return self.H.shape[1]


def sample_cmlg(params: CMLGParams, rng: np.random.Generator) -> np.ndarray:
    """Draw from a conditional multivariate log-gamma distribution.

    Draws the underlying log-gamma vector ``w`` and projects it onto the
    column space of ``H`` via least squares, which is an exact sampler for
    the conditional form.
    """
    w = log_gamma_draws(rng, params.alpha, params.kappa)
    theta, _, rank, _ = np.linalg.lstsq(params.H, w, rcond=None)
    if rank < params.H.shape[1]:
        raise DegenerateDesignError(
            "constraint matrix became rank deficient at solve time")
    return theta


def sample_cmlg_truncated_positive(params: CMLGParams,
                                   rng: np.random.Generator,
                                   max_attempts: int = 1000) -> float:
    """Rejection-sample a scalar conditional log-gamma restricted to (0, inf).

    Raises
    ------
    TruncationFailureError
        If no draw lands in the positive half line within ``max_attempts``;
        the message reports the observed acceptance rate.
    """
    if params.dim != 1:
        raise InvalidParameterError(
            "positive truncation is defined for scalar targets only")
    if max_attempts < 1:
        raise InvalidParameterError("max_attempts must be at least 1")
    for _ in range(max_attempts):
        draw = float(sample_cmlg(params, rng)[0])
        if draw > 0.0:
            return draw
    raise TruncationFailureError(
        f"no positive draw in {max_attempts} attempts "
        f"(acceptance rate estimate 0/{max_attempts})")


def gaussian_limit_params(c, V, alpha: float) -> MLGParams:
    """Log-gamma parameters that approach N(c, V V') as ``alpha`` grows.

    Returns ``MLGParams(c, sqrt(alpha) * V, alpha * 1, alpha * 1)``; the
    approximation error shrinks at rate ``alpha**-0.5``.
    """
    if not np.isscalar(alpha) or alpha <= 0:
        raise InvalidParameterError("alpha must be a positive scalar")
    c = np.atleast_1d(np.asarray(c, dtype=np.float64))
    V = np.asarray(V, dtype=np.float64)
    m = c.shape[0]
    ones = np.full(m, float(alpha))
    return MLGParams(mu=c, V=np.sqrt(alpha) * V, alpha=ones, kappa=ones)
