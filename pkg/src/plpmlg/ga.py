"""Gaussian comparison model on shifted-log counts with weighted conjugate updates.

Counts enter as ``v = log(Z + delta)`` and each unit contributes a Normal
log density times its scaled survey weight, equivalent to a Normal with
variance ``sigma2_xi / w_tilde``. All four blocks then have the classical
conjugate full conditionals (Normal for the regression and area blocks,
inverse gamma for the two variances), so the Gibbs sweep needs no rejection
steps. Predictions invert the transform as ``max(0, exp(v) - delta)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import lognormal_model_area_sums
from .exceptions import (
    ConfigurationError,
    InvalidParameterError,
    SamplingFailureError,
)
from .gibbs import ModelData

__all__ = [
    "GAConfig",
    "GAState",
    "GADraws",
    "ga_log_joint",
    "ga_conditional_log_kernel",
    "run_ga_gibbs",
    "ga_predict",
]


@dataclass(frozen=True)
class GAConfig:
    """Configuration of the shifted-log Gaussian model.

    ``delta`` is the shift added before the log transform and removed in
    back-transformed predictions; ``sigma2_beta`` the prior variance of the
    regression coefficients; ``ig_shape`` and ``ig_rate`` the shared
    inverse-gamma hyperparameters of both variance components.
    ``predictive_noise`` controls whether predictions include the unit-level
    Normal draw or only the mean back-transform.
    """

    delta: float = 5.0
    sigma2_beta: float = 1000.0
    ig_shape: float = 0.1
    ig_rate: float = 0.1
    n_iter: int = 2000
    burn_in: int = 1000
    include_area_effects: bool = True
    predictive_noise: bool = True

    def __post_init__(self):
        for name in ("delta", "sigma2_beta", "ig_shape", "ig_rate"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.n_iter < 1 or not 0 <= self.burn_in < self.n_iter:
            raise ConfigurationError("need 0 <= burn_in < n_iter")


@dataclass
class GAState:
    """Mutable chain state: coefficients, area effects, two variances."""

    beta: np.ndarray
    eta: np.ndarray
    sigma2_xi: float
    sigma2_eta: float


@dataclass(frozen=True)
class GADraws:
    """Kept draws of one Gaussian-model chain."""

    beta: np.ndarray
    eta: np.ndarray
    sigma2_xi: np.ndarray
    sigma2_eta: np.ndarray
    rng_seed: int = -1

    def __post_init__(self):
        if self.beta.ndim != 2 or self.eta.ndim != 2:
            raise InvalidParameterError("beta and eta draws must be 2-d")
        k = self.beta.shape[0]
        if (self.eta.shape[0] != k or self.sigma2_xi.shape != (k,)
                or self.sigma2_eta.shape != (k,)):
            raise InvalidParameterError("draw arrays must share their length")
        if np.any(self.sigma2_xi <= 0) or np.any(self.sigma2_eta <= 0):
            raise InvalidParameterError("variance draws must be positive")

    @property
    def kept(self) -> int:
        return self.beta.shape[0]

    def to_csv(self, path) -> None:
        """Write draws with one row per iteration, stable column names."""
        p, r = self.beta.shape[1], self.eta.shape[1]
        header = ([f"beta_{j}" for j in range(p)]
                  + [f"eta_{j}" for j in range(r)]
                  + ["sigma2_xi", "sigma2_eta"])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(self.kept):
                row = [repr(float(v)) for v in self.beta[t]]
                row += [repr(float(v)) for v in self.eta[t]]
                row += [repr(float(self.sigma2_xi[t])),
                        repr(float(self.sigma2_eta[t]))]
                writer.writerow(row)


def _shifted_log(data: ModelData, config: GAConfig) -> np.ndarray:
    return np.log(data.Z + config.delta)


def ga_log_joint(state: GAState, data: ModelData, config: GAConfig) -> float:
    """Log joint density up to constants not depending on the state."""
    v = _shifted_log(data, config)
    e = v - data.X @ state.beta - state.eta[data.area_codes]
    s2 = state.sigma2_xi
    wsum = float(data.w_tilde.sum())
    out = -0.5 * float(data.w_tilde @ (e * e)) / s2 - 0.5 * wsum * math.log(s2)
    out -= 0.5 * float(state.beta @ state.beta) / config.sigma2_beta
    out -= (0.5 * float(state.eta @ state.eta) / state.sigma2_eta
            + 0.5 * data.r * math.log(state.sigma2_eta))
    for s in (state.sigma2_xi, state.sigma2_eta):
        out += -(config.ig_shape + 1.0) * math.log(s) - config.ig_rate / s
    return out


def ga_conditional_log_kernel(block: str, value, state: GAState,
                              data: ModelData, config: GAConfig) -> float:
    """Unnormalized log density of one full conditional at ``value``."""
    v = _shifted_log(data, config)
    if block == "beta":
        value = np.asarray(value, dtype=np.float64)
        e = v - data.X @ value - state.eta[data.area_codes]
        return (-0.5 * float(data.w_tilde @ (e * e)) / state.sigma2_xi
                - 0.5 * float(value @ value) / config.sigma2_beta)
    if block == "eta":
        value = np.asarray(value, dtype=np.float64)
        e = v - data.X @ state.beta - value[data.area_codes]
        return (-0.5 * float(data.w_tilde @ (e * e)) / state.sigma2_xi
                - 0.5 * float(value @ value) / state.sigma2_eta)
    if block == "sigma2_xi":
        value = float(value)
        e = v - data.X @ state.beta - state.eta[data.area_codes]
        shape = config.ig_shape + 0.5 * float(data.w_tilde.sum())
        rate = config.ig_rate + 0.5 * float(data.w_tilde @ (e * e))
        return -(shape + 1.0) * math.log(value) - rate / value
    if block == "sigma2_eta":
        value = float(value)
        shape = config.ig_shape + 0.5 * data.r
        rate = config.ig_rate + 0.5 * float(state.eta @ state.eta)
        return -(shape + 1.0) * math.log(value) - rate / value
    raise InvalidParameterError(f"unknown block {block!r}")


def _ga_init(data: ModelData, config: GAConfig) -> GAState:
    v = _shifted_log(data, config)
    sw = np.sqrt(data.w_tilde)
    beta, _, rank, _ = np.linalg.lstsq(sw[:, None] * data.X, sw * v,
                                       rcond=None)
    if rank < data.p:
        raise SamplingFailureError("design matrix lost rank in initialization")
    return GAState(beta=beta, eta=np.zeros(data.r),
                   sigma2_xi=1.0, sigma2_eta=1.0)


def _inv_gamma(rng, shape: float, rate: float) -> float:
    return rate / rng.gamma(shape, 1.0)


def run_ga_gibbs(data: ModelData, config: GAConfig, rng) -> GADraws:
    """Run one chain of the shifted-log Gaussian model and return kept draws.

    ``rng`` may be a Generator or an integer seed; a seed is recorded in the
    result. The sweep order is regression block, area block, unit variance,
    area variance; every update is an exact conjugate draw.
    """
    seed = -1
    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
        rng = np.random.default_rng(seed)
    v = _shifted_log(data, config)
    state = _ga_init(data, config)
    n, p, r = data.n, data.p, data.r
    codes = data.area_codes
    w = data.w_tilde
    wsum = float(w.sum())
    wx = w[:, None] * data.X
    xtwx = data.X.T @ wx
    area_w = np.bincount(codes, weights=w, minlength=r)
    kept = config.n_iter - config.burn_in
    out_beta = np.empty((kept, p))
    out_eta = np.empty((kept, r))
    out_s2xi = np.empty(kept)
    out_s2eta = np.empty(kept)
    eye_p = np.eye(p)
    for t in range(config.n_iter):
        prec = xtwx / state.sigma2_xi + eye_p / config.sigma2_beta
        resid = v - state.eta[codes]
        lhs = np.linalg.cholesky(prec)
        mean = np.linalg.solve(prec, wx.T @ resid / state.sigma2_xi)
        z = rng.standard_normal(p)
        state.beta = mean + np.linalg.solve(lhs.T, z)
        xb = data.X @ state.beta

        if config.include_area_effects:
            prec_eta = area_w / state.sigma2_xi + 1.0 / state.sigma2_eta
            top = np.bincount(codes, weights=w * (v - xb), minlength=r)
            mean_eta = top / state.sigma2_xi / prec_eta
            state.eta = mean_eta + rng.standard_normal(r) / np.sqrt(prec_eta)

        e = v - xb - state.eta[codes]
        state.sigma2_xi = _inv_gamma(rng, config.ig_shape + 0.5 * wsum,
                                     config.ig_rate + 0.5 * float(w @ (e * e)))
        if config.include_area_effects:
            state.sigma2_eta = _inv_gamma(
                rng, config.ig_shape + 0.5 * r,
                config.ig_rate + 0.5 * float(state.eta @ state.eta))

        if not (np.all(np.isfinite(state.beta))
                and np.all(np.isfinite(state.eta))
                and math.isfinite(state.sigma2_xi) and state.sigma2_xi > 0
                and math.isfinite(state.sigma2_eta) and state.sigma2_eta > 0):
            raise SamplingFailureError(f"non-finite state at iteration {t}")
        k = t - config.burn_in
        if k >= 0:
            out_beta[k] = state.beta
            out_eta[k] = state.eta
            out_s2xi[k] = state.sigma2_xi
            out_s2eta[k] = state.sigma2_eta
    return GADraws(beta=out_beta, eta=out_eta, sigma2_xi=out_s2xi,
                   sigma2_eta=out_s2eta, rng_seed=seed)


def ga_predict(draws: GADraws, population, design, config: GAConfig, rng,
               vacancy: bool = True):
    """Predictive per-area totals of the derived indicator under the GA model.

    For each kept draw, every unsampled unit receives a predictive value on
    the shifted-log scale (with Normal noise at that draw's unit standard
    deviation unless ``predictive_noise`` is off), back-transformed as
    ``max(0, exp(v) - delta)``; the indicator transform counts a unit as
    vacant when the back-transform is exactly zero. Observed sampled
    contributions are added so area totals aggregate exactly.
    """
    from .estimators import (PredictiveTotals, predictive_rngs,
                             sampled_area_base, summarize_total_draws)

    base, unsampled, codes_u = sampled_area_base(population, design, vacancy)
    r = population.n_areas
    kept = draws.kept
    totals = np.empty((kept, r))
    if unsampled.size == 0:
        # census: totals are known exactly, so bypass the draw summary
        totals[:] = base
        return PredictiveTotals(area_labels=population.area_labels,
                                total_draws=totals, point=base.copy(),
                                se=np.zeros(r), method="GA")
    else:
        x_u = population.design_matrix(unsampled)
        if x_u.shape[1] != draws.beta.shape[1]:
            raise InvalidParameterError(
                "population design matrix width does not match the draws")
        streams = predictive_rngs(rng, kept)
        for t in range(kept):
            mean_log = x_u @ draws.beta[t] + draws.eta[t][codes_u]
            sd = math.sqrt(float(draws.sigma2_xi[t]))
            totals[t] = base + lognormal_model_area_sums(
                streams[t], mean_log, codes_u, r, sd, config.delta,
                config.predictive_noise, vacancy)
    point, se = summarize_total_draws(totals)
    return PredictiveTotals(area_labels=population.area_labels,
                            total_draws=totals, point=point, se=se,
                            method="GA")
