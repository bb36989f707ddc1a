"""Adaptive rejection sampling for log-concave scalar densities.

Derivative-based tangent hulls: the target's log density and gradient are
evaluated at a growing set of abscissae; tangents at those points form a
piecewise-linear upper envelope whose piecewise-exponential distribution is
sampled exactly in log space. Rejected proposals become new abscissae, so the
envelope tightens as sampling proceeds. The caller guarantees strict
concavity of the log density; every returned draw is exact.

Supports densities on (lower, inf) and, with ``lower=None``, on the whole
real line; the latter requires the hunt to anchor a positive gradient on the
left as well as a negative one on the right.
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import SamplingFailureError

__all__ = ["ars_sample"]

_MAX_POINTS = 64
_MAX_REJECTS = 500
_MAX_HUNT = 60
_LOG_CAP = 1e15


def _lin(h0, g, dx):
    """Tangent value h0 + g*dx, saturated on the log scale.

    Hunt points can land astronomically far out, where the product
    overflows a float even though only the ordering of segment masses
    matters; capping at +-1e15 keeps the categorical draw finite without
    changing which segment dominates.
    """
    p = float(g) * float(dx)
    if not math.isfinite(p):
        p = _LOG_CAP if (g > 0.0) == (dx > 0.0) else -_LOG_CAP
    return min(max(float(h0) + p, -_LOG_CAP), _LOG_CAP)


def _hull(ts, hs, gs, lo):
    """Tangent-intersection breakpoints and per-segment log masses.

    Segment k lives on (z[k], z[k+1]) under the tangent at ts[k]. The first
    breakpoint is ``lo`` (possibly -inf, requiring gs[0] > 0) and the last is
    +inf (requiring gs[-1] < 0). Log masses are shifted by max(hs); the shift
    cancels in the categorical draw and is returned for the acceptance step.
    """
    k = len(ts)
    z = np.empty(k + 1)
    z[0] = lo
    z[k] = np.inf
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(k - 1):
            dg = gs[i] - gs[i + 1]
            if abs(dg) < 1e-13 * max(1.0, abs(gs[i])):
                z[i + 1] = 0.5 * (ts[i] + ts[i + 1])
            else:
                # intersection of the two tangents; products can overflow
                # for extreme hunt points, in which case the midpoint is
                # safe because the clamp below keeps the subdivision valid
                num = (hs[i + 1] - hs[i] - ts[i + 1] * gs[i + 1]
                       + ts[i] * gs[i])
                if math.isfinite(num):
                    z[i + 1] = num / dg
                else:
                    z[i + 1] = 0.5 * (ts[i] + ts[i + 1])
            z[i + 1] = min(max(z[i + 1], ts[i]), ts[i + 1])
    href = max(hs)
    log_mass = np.empty(k)
    for i in range(k):
        g = gs[i]
        if i == 0 and not np.isfinite(z[0]):
            # left-infinite segment: mass = exp(b)/g with b the tangent
            # value at the right breakpoint; g > 0 by the hunt contract
            b = _lin(hs[0] - href, g, z[1] - ts[0])
            log_mass[0] = b - math.log(g)
            continue
        a = _lin(hs[i] - href, g, z[i] - ts[i])
        if not np.isfinite(z[i + 1]):
            log_mass[i] = a - math.log(-g)
            continue
        width = z[i + 1] - z[i]
        if width <= 0.0:
            log_mass[i] = -np.inf
            continue
        span = float(g) * width
        if not math.isfinite(span):
            span = _LOG_CAP if g > 0.0 else -_LOG_CAP
        if abs(span) < 1e-12:
            log_mass[i] = a + math.log(width)
        elif span > 0.0:
            b = min(a + span, _LOG_CAP)
            log_mass[i] = b + math.log1p(-math.exp(-span)) - math.log(g)
        else:
            log_mass[i] = a + math.log1p(-math.exp(span)) - math.log(-g)
    return z, log_mass, href


def _sample_segment(rng, z_lo, z_hi, g):
    """Inverse-CDF draw from a density proportional to exp(g*x) on a segment."""
    u = rng.random()
    if not np.isfinite(z_lo):
        return z_hi + math.log(u) / g if u > 0.0 else -np.inf
    if not np.isfinite(z_hi):
        return z_lo + math.log1p(-u) / g
    width = z_hi - z_lo
    span = float(g) * float(width)
    if abs(span) < 1e-12:
        return z_lo + u * width
    if span > 0.0:
        return z_hi + math.log(u + (1.0 - u) * math.exp(-span)) / g
    return z_lo + math.log1p(u * math.expm1(span)) / g


def ars_sample(rng: np.random.Generator, fn, lower: float | None = 0.0,
               guess: float = 1.0) -> float:
    """Draw one variate from a strictly log-concave density.

    Parameters
    ----------
    rng : numpy.random.Generator
        Source of randomness.
    fn : callable
        Maps a scalar to ``(log_density, gradient)``, both up to one shared
        additive constant in the log density.
    lower : float or None
        Open lower endpoint of the support; None means the whole real line.
    guess : float
        Starting abscissa, ideally near the previous draw from the same
        target; a stale guess only costs extra hunt evaluations.

    Notes
    -----
    No mode search is run up front. The initial hunt expands the abscissa
    set until the leftmost gradient is positive (whole-line case only) and
    the rightmost is negative, and every evaluation becomes a hull point.
    """
    unbounded = lower is None
    lo = -np.inf if unbounded else float(lower)
    ts, hs, gs = [], [], []

    def add(x):
        h, g = fn(x)
        if not (np.isfinite(h) and np.isfinite(g)):
            raise SamplingFailureError(
                f"log density not finite at {x!r} during rejection sampling")
        ts.append(x)
        hs.append(h)
        gs.append(g)
        return g

    hunts = 0
    if unbounded:
        add(guess)
        step = 1.0 + 0.25 * abs(guess)
        while gs[int(np.argmin(ts))] <= 0.0:
            hunts += 1
            if hunts > _MAX_HUNT:
                raise SamplingFailureError(
                    "gradient never became positive; target may not be "
                    "integrable on the lower tail")
            add(min(ts) - step)
            step *= 2.0
        step = 1.0 + 0.25 * abs(guess)
        while gs[int(np.argmax(ts))] >= 0.0:
            hunts += 1
            if hunts > _MAX_HUNT:
                raise SamplingFailureError(
                    "gradient never became negative; target may not be "
                    "integrable on the upper tail")
            add(max(ts) + step)
            step *= 2.0
    else:
        t = lo + max(guess - lo, 1e-8)
        g = add(t)
        if g <= 0.0:
            # hunt toward the boundary for mass, stopping once the log
            # density has fallen far enough below the running maximum to
            # be negligible
            while g <= 0.0 and hunts < 25 and hs[-1] > max(hs) - 40.0:
                hunts += 1
                t = lo + (t - lo) * 0.5
                g = add(t)
        t = max(ts)
        while gs[int(np.argmax(ts))] >= 0.0:
            hunts += 1
            if hunts > _MAX_HUNT:
                raise SamplingFailureError(
                    "gradient never became negative; target may not be "
                    "integrable on the upper tail")
            t = lo + (t - lo) * 2.0
            add(t)

    order = np.argsort(ts)
    ts = [ts[i] for i in order]
    hs = [hs[i] for i in order]
    gs = [gs[i] for i in order]

    for _ in range(_MAX_REJECTS):
        z, log_mass, href = _hull(ts, hs, gs, lo)
        m = float(log_mass.max())
        if not math.isfinite(m):
            raise SamplingFailureError(
                "tangent envelope carries no finite mass")
        probs = np.exp(log_mass - m)
        probs /= probs.sum()
        cdf = np.cumsum(probs)
        k = int(np.searchsorted(cdf, rng.random(), side="right"))
        k = min(k, len(ts) - 1)
        x = _sample_segment(rng, z[k], z[k + 1], gs[k])
        if not np.isfinite(x) or x <= lo:
            continue
        x = min(max(x, z[k]), z[k + 1])
        upper = _lin(hs[k] - href, gs[k], x - ts[k])
        h, g = fn(x)
        if not (np.isfinite(h) and np.isfinite(g)):
            continue
        if rng.random() <= math.exp(min(h - href - upper, 0.0)):
            return x
        if len(ts) < _MAX_POINTS:
            j = int(np.searchsorted(ts, x))
            gap = min(abs(x - ts[j - 1]) if j > 0 else np.inf,
                      abs(ts[j] - x) if j < len(ts) else np.inf)
            if gap > 1e-13 * max(1.0, abs(x)):
                ts.insert(j, x)
                hs.insert(j, h)
                gs.insert(j, g)
    raise SamplingFailureError(
        f"rejection sampling failed to accept within {_MAX_REJECTS} proposals")
