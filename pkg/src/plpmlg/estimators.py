"""Design-based direct estimators, model poststratification, replicate metrics.

The estimation target is the per-area total of a derived unit indicator,
by default the vacancy indicator ``1{Z = 0}``. Direct estimates apply the
inverse-probability total within each area with a ratio-style variance.
Model-based estimates predict every unsampled unit from posterior draws,
apply the same indicator, and add the observed sampled contribution, so
area totals aggregate exactly to the statewide total draw by draw. Metrics
summarize replicated runs as MSE, absolute bias, and averaged SEs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import count_model_area_sums
from .design import SampleDesign
from .diagnostics import normalized_importance_weights
from .exceptions import EstimationError, InvalidParameterError
from .gibbs import PosteriorDraws
from .population import Population

__all__ = [
    "AreaEstimate",
    "PredictiveTotals",
    "ht_total",
    "hajek_variance",
    "direct_area_estimates",
    "predictive_rngs",
    "sampled_area_base",
    "summarize_total_draws",
    "poststratify_totals",
    "replicate_metrics",
]

METHODS = ("direct", "GA", "PL-PMLG", "UW-PMLG")


@dataclass(frozen=True)
class AreaEstimate:
    """One area's estimated indicator total under one method."""

    area_id: object
    point: float
    se: float
    method: str
    flagged_missing: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParameterError(f"unknown method {self.method!r}")
        if not self.flagged_missing and self.se < 0:
            raise InvalidParameterError("se must be nonnegative")


@dataclass(frozen=True)
class PredictiveTotals:
    """Per-area posterior-predictive total draws with their summaries."""

    area_labels: np.ndarray
    total_draws: np.ndarray
    point: np.ndarray
    se: np.ndarray
    method: str

    def area_estimates(self) -> list:
        return [AreaEstimate(area_id=self.area_labels[k],
                             point=float(self.point[k]),
                             se=float(self.se[k]), method=self.method)
                for k in range(self.area_labels.shape[0])]


def ht_total(y, pi) -> float:
    """Inverse-probability estimate of a total: sum of y / pi."""
    y = np.asarray(y, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    if y.shape != pi.shape or y.ndim != 1:
        raise InvalidParameterError("y and pi must be equal-length vectors")
    if y.size == 0:
        return 0.0
    if np.any(pi <= 0.0) or np.any(pi > 1.0):
        raise InvalidParameterError("inclusion probabilities must lie in (0, 1]")
    return float(np.sum(y / pi))


def hajek_variance(y, pi) -> float:
    """Ratio-style variance of the inverse-probability total.

    Implements ``v = n/(n-1) * sum (1-pi)(y/pi - A)^2`` with ``A`` the
    (1-pi)-weighted mean of ``y/pi``. A census returns exactly zero. When
    every response is zero the variance is reported as NaN, the flagged
    value excluded from SE averaging downstream.
    """
    y = np.asarray(y, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    if y.shape != pi.shape or y.ndim != 1:
        raise InvalidParameterError("y and pi must be equal-length vectors")
    n = y.size
    if n < 2:
        raise EstimationError("variance needs at least two sampled units")
    if np.any(pi <= 0.0) or np.any(pi > 1.0):
        raise InvalidParameterError("inclusion probabilities must lie in (0, 1]")
    q = 1.0 - pi
    if not np.any(q > 0.0):
        return 0.0
    if not np.any(y != 0.0):
        return math.nan
    t = y / pi
    a = float(q @ t) / float(q.sum())
    dev = t - a
    return n / (n - 1.0) * float(q @ (dev * dev))


def direct_area_estimates(population: Population, design: SampleDesign,
                          vacancy: bool = True) -> list:
    """Per-area direct estimates of the derived indicator total.

    Areas with no sampled units get a zero point estimate, and areas whose
    variance is unavailable (all-zero responses, or fewer than two sampled
    units) are flagged missing; both cases stay in the output so every
    (area, method) cell is present.
    """
    idx = design.selected
    codes = population.area_codes[idx]
    z = population.z[idx]
    y = (z == 0).astype(np.float64) if vacancy else z.astype(np.float64)
    out = []
    for k, label in enumerate(population.area_labels):
        in_area = codes == k
        if not np.any(in_area):
            out.append(AreaEstimate(area_id=label, point=0.0, se=math.nan,
                                    method="direct", flagged_missing=True))
            continue
        ya, pa = y[in_area], design.pi[in_area]
        point = ht_total(ya, pa)
        if ya.size < 2:
            out.append(AreaEstimate(area_id=label, point=point, se=math.nan,
                                    method="direct", flagged_missing=True))
            continue
        v = hajek_variance(ya, pa)
        if math.isnan(v):
            out.append(AreaEstimate(area_id=label, point=point, se=math.nan,
                                    method="direct", flagged_missing=True))
        else:
            out.append(AreaEstimate(area_id=label, point=point,
                                    se=math.sqrt(v), method="direct"))
    return out


def predictive_rngs(rng, kept: int) -> list:
    """Per-draw generators: keyed by (seed, draw index) when given a seed.

    An integer seed yields substreams reproducible independently of how
    draws are partitioned across workers; a Generator is split sequentially
    and is reproducible only for a fixed partition.
    """
    if isinstance(rng, (int, np.integer)):
        return [np.random.default_rng(np.random.SeedSequence((int(rng), t)))
                for t in range(kept)]
    return list(rng.spawn(kept))


def sampled_area_base(population: Population, design: SampleDesign,
                      vacancy: bool = True):
    """Observed per-area indicator base and the unsampled complement.

    Returns the per-area sums of the derived indicator over sampled units,
    the population positions of unsampled units, and their area codes.
    """
    idx = design.selected
    codes = population.area_codes[idx]
    z = population.z[idx]
    vals = (z == 0).astype(np.float64) if vacancy else z.astype(np.float64)
    base = np.bincount(codes, weights=vals, minlength=population.n_areas)
    mask = np.ones(population.n_units, dtype=bool)
    mask[idx] = False
    unsampled = np.flatnonzero(mask)
    return base, unsampled, population.area_codes[unsampled]


def summarize_total_draws(total_draws, imp_log_w=None):
    """Self-normalized importance mean and standard deviation per area.

    With absent or identically zero log weights this reduces exactly to the
    plain mean and (population-form) standard deviation over draws.
    """
    total_draws = np.asarray(total_draws, dtype=np.float64)
    kept = total_draws.shape[0]
    if kept == 0:
        raise InvalidParameterError("need at least one kept draw")
    if imp_log_w is None:
        imp_log_w = np.zeros(kept)
    u = normalized_importance_weights(imp_log_w)
    point = u @ total_draws
    dev = total_draws - point
    var = u @ (dev * dev)
    return point, np.sqrt(np.maximum(var, 0.0))


def poststratify_totals(draws: PosteriorDraws, population: Population,
                        design: SampleDesign, model: str, rng, *,
                        alpha_gauss: float = 1000.0, fresh_xi: bool = True,
                        vacancy: bool = True) -> PredictiveTotals:
    """Predictive per-area totals of the derived indicator under count draws.

    For each kept draw, every unsampled unit receives a count simulated at
    intensity ``exp(x'beta + eta_area + xi)`` with ``xi`` a fresh prior draw
    at that iteration's unit scale (or zero when ``fresh_xi`` is off); the
    indicator transform is applied per unit and summed by area, then the
    observed sampled contribution is added. Summaries are self-normalized
    importance weighted whenever the chain carries nonzero log weights.
    """
    if model not in ("PL-PMLG", "UW-PMLG"):
        raise InvalidParameterError(f"model must be PL-PMLG or UW-PMLG, "
                                    f"got {model!r}")
    base, unsampled, codes_u = sampled_area_base(population, design, vacancy)
    r = population.n_areas
    kept = draws.kept
    totals = np.empty((kept, r))
    if unsampled.size == 0:
        # census: every unit is observed, so the totals are known exactly
        # and the weighted summary must not leak float dust into the SE
        totals[:] = base
        return PredictiveTotals(area_labels=population.area_labels,
                                total_draws=totals, point=base.copy(),
                                se=np.zeros(r), method=model)
    else:
        x_u = population.design_matrix(unsampled)
        if x_u.shape[1] != draws.beta.shape[1]:
            raise InvalidParameterError(
                "population design matrix width does not match the draws")
        streams = predictive_rngs(rng, kept)
        sqrt_a = math.sqrt(alpha_gauss)
        for t in range(kept):
            mean_log = x_u @ draws.beta[t] + draws.eta[t][codes_u]
            sums = count_model_area_sums(
                streams[t], mean_log, codes_u, r,
                sqrt_a * float(draws.sigma_xi[t]) if fresh_xi else 0.0,
                alpha_gauss, fresh_xi, vacancy)
            totals[t] = base + sums
    point, se = summarize_total_draws(totals, draws.imp_log_w)
    return PredictiveTotals(area_labels=population.area_labels,
                            total_draws=totals, point=point, se=se,
                            method=model)


def true_area_totals(population: Population, vacancy: bool = True) -> dict:
    """Map each area label to its true derived-indicator total."""
    vals = ((population.z == 0).astype(np.float64) if vacancy
            else population.z.astype(np.float64))
    sums = np.bincount(population.area_codes, weights=vals,
                       minlength=population.n_areas)
    return {label: float(sums[k])
            for k, label in enumerate(population.area_labels)}


def replicate_metrics(estimates, truth: dict, pooled_bias: bool = False):
    """Aggregate replicated area estimates into per-method metrics.

    ``estimates`` is a sequence over replicates, each a sequence of
    AreaEstimate records (methods may be mixed within a replicate). Per
    method, MSE is the mean of squared errors over every (replicate, area)
    cell; absolute bias averages the absolute per-area mean error over
    areas, or with ``pooled_bias`` takes the absolute value of the pooled
    mean error; averaged SEs exclude flagged-missing cells and report None
    when every replicate was flagged.
    """
    if len(estimates) == 0:
        raise InvalidParameterError("need at least one replicate")
    errors = {}
    ses = {}
    for rep in estimates:
        for est in rep:
            if est.area_id not in truth:
                raise EstimationError(
                    f"area {est.area_id!r} has no true total")
            key = (est.method, est.area_id)
            errors.setdefault(key, []).append(est.point - truth[est.area_id])
            if not est.flagged_missing:
                ses.setdefault(key, []).append(est.se)
    methods = sorted({m for m, _ in errors})
    metric_rows = []
    for m in methods:
        cells = [e for (mm, _), errs in errors.items() if mm == m
                 for e in errs]
        per_area = [np.mean(errs) for (mm, _), errs in sorted(
            errors.items(), key=lambda kv: str(kv[0][1])) if mm == m]
        if pooled_bias:
            abs_bias = abs(float(np.mean(cells)))
        else:
            abs_bias = float(np.mean(np.abs(per_area)))
        metric_rows.append({"method": m,
                            "mse": float(np.mean(np.square(cells))),
                            "abs_bias": abs_bias})
    se_rows = []
    for (m, area) in sorted(errors, key=lambda k: (k[0], str(k[1]))):
        vals = ses.get((m, area))
        se_rows.append({"method": m, "area_id": area,
                        "avg_se": float(np.mean(vals)) if vals else None})
    return metric_rows, se_rows
