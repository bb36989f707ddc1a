"""Chain and importance-weight diagnostics.

Split-chain potential scale reduction flags non-stationarity within a single
run by comparing its two halves; importance-weight summaries quantify how
much resampling weight concentration costs in effective draws.
"""

from __future__ import annotations

import logging

import numpy as np

from .exceptions import InvalidParameterError

__all__ = [
    "normalized_importance_weights",
    "importance_ess",
    "split_rhat",
    "convergence_report",
]

logger = logging.getLogger(__name__)


def normalized_importance_weights(log_w) -> np.ndarray:
    """Self-normalized weights from log importance weights.

    Stable under any common additive offset; the result sums to one.
    """
    log_w = np.asarray(log_w, dtype=np.float64)
    if log_w.ndim != 1 or log_w.size == 0:
        raise InvalidParameterError("log weights must be a nonempty vector")
    if np.any(np.isnan(log_w)) or np.any(log_w == np.inf):
        raise InvalidParameterError("log weights must be finite or -inf")
    shifted = log_w - log_w.max()
    u = np.exp(shifted)
    total = u.sum()
    if not total > 0.0:
        raise InvalidParameterError("importance weights sum to zero")
    return u / total


def importance_ess(log_w) -> float:
    """Effective sample size of self-normalized importance weights.

    Computed as ``(sum u)^2 / sum(u^2) = 1 / sum(u^2)`` for normalized
    weights ``u``; equals the number of draws when weights are uniform.
    """
    u = normalized_importance_weights(log_w)
    return float(1.0 / np.sum(u * u))


def split_rhat(x) -> float:
    """Potential scale reduction of one chain split into two halves.

    Values near 1 are consistent with stationarity; above about 1.1 the two
    halves disagree. An odd leading draw is dropped.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 4:
        raise InvalidParameterError("need a vector of at least 4 draws")
    half = x.size // 2
    chains = np.stack([x[x.size - 2 * half:x.size - half], x[x.size - half:]])
    length = half
    within = chains.var(axis=1, ddof=1).mean()
    between = length * chains.mean(axis=1).var(ddof=1)
    if within == 0.0:
        return 1.0 if between == 0.0 else np.inf
    var_plus = (length - 1.0) / length * within + between / length
    return float(np.sqrt(var_plus / within))


def convergence_report(named_draws: dict, warn_threshold: float = 1.1) -> dict:
    """Split-chain diagnostics for a set of named scalar traces.

    Logs one warning naming every trace whose statistic exceeds the
    threshold; returns the full name-to-statistic table.
    """
    table = {name: split_rhat(np.asarray(trace))
             for name, trace in named_draws.items()}
    flagged = {k: v for k, v in table.items() if v > warn_threshold}
    if flagged:
        worst = max(flagged, key=flagged.get)
        logger.warning(
            "split-chain scale reduction above %.2f for %d trace(s); "
            "worst %s = %.3f", warn_threshold, len(flagged), worst,
            flagged[worst])
    return table
