"""Midzuno probability-proportional-to-size sampling and design weights.

The Midzuno scheme draws the first unit with probability proportional to
size and completes the sample by simple random sampling without replacement
from the remaining units. Its first-order inclusion probabilities have the
closed form ``pi_i = p_i (N - n)/(N - 1) + (n - 1)/(N - 1)`` with
``p_i = size_i / sum(sizes)``; the implementation is validated against exact
enumeration of the two-stage scheme in the test suite, which is treated as
the normative definition.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CertaintyUnitError, IngestionError, InvalidParameterError
from .population import CSVSchema, Population, _normalize_labels, _parse_float, _parse_int

__all__ = [
    "SampleDesign",
    "midzuno_inclusion_probs",
    "midzuno_sample",
    "informative_resample_weights",
    "SampleData",
    "write_sample_csv",
    "read_sample_csv",
]


@dataclass(frozen=True)
class SampleDesign:
    """A drawn without-replacement sample with its design weights.

    Parameters
    ----------
    selected : ndarray of int64
        Positions of the sampled units in the source population.
    pi : ndarray of float64
        First-order inclusion probabilities of the selected units, in (0, 1].
    w : ndarray of float64, optional
        Design weights; computed as ``1 / pi`` when omitted and required to
        match it exactly when given.
    """

    selected: np.ndarray
    pi: np.ndarray
    w: np.ndarray = None

    def __post_init__(self):
        selected = np.asarray(self.selected, dtype=np.int64)
        pi = np.asarray(self.pi, dtype=np.float64)
        if selected.ndim != 1 or pi.shape != selected.shape:
            raise InvalidParameterError("selected and pi must be equal-length vectors")
        if selected.size == 0:
            raise InvalidParameterError("sample must contain at least one unit")
        if np.unique(selected).size != selected.size:
            raise InvalidParameterError("selected indices must be distinct")
        if np.any(pi <= 0.0) or np.any(pi > 1.0):
            raise InvalidParameterError("inclusion probabilities must lie in (0, 1]")
        w = self.w
        if w is None:
            w = 1.0 / pi
        else:
            w = np.asarray(w, dtype=np.float64)
            if w.shape != pi.shape or not np.all(w == 1.0 / pi):
                raise InvalidParameterError("w must equal 1/pi exactly")
        object.__setattr__(self, "selected", selected)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.selected.shape[0]


def midzuno_inclusion_probs(sizes, n: int) -> np.ndarray:
    """First-order inclusion probabilities of the Midzuno scheme.

    Guarantees ``sum(pi) == n``. A census (``n == N``) returns all ones;
    otherwise any probability reaching one raises, because capping would
    silently change the design.
    """
    sizes = np.asarray(sizes, dtype=np.float64)
    big_n = sizes.shape[0]
    if sizes.ndim != 1 or big_n == 0:
        raise InvalidParameterError("sizes must be a nonempty vector")
    if not np.all(np.isfinite(sizes)) or np.any(sizes <= 0.0):
        raise InvalidParameterError("sizes must be positive and finite")
    if not 1 <= n <= big_n:
        raise InvalidParameterError(f"need 1 <= n <= {big_n}, got n={n}")
    if n == big_n:
        return np.ones(big_n)
    p = sizes / sizes.sum()
    pi = p * ((big_n - n) / (big_n - 1.0)) + (n - 1.0) / (big_n - 1.0)
    if np.any(pi >= 1.0):
        worst = int(np.argmax(pi))
        raise CertaintyUnitError(
            f"unit {worst} has inclusion probability {pi[worst]:.6g} >= 1; "
            "remove certainty units or shrink their sizes")
    return pi


def midzuno_sample(population: Population, n: int,
                   rng: np.random.Generator) -> SampleDesign:
    """Draw one Midzuno PPS sample from a population.

    First unit proportional to ``size_measure``, remaining ``n - 1`` by
    simple random sampling without replacement from the rest.
    """
    sizes = population.size_measure
    pi = midzuno_inclusion_probs(sizes, n)
    big_n = sizes.shape[0]
    p = sizes / sizes.sum()
    first = int(rng.choice(big_n, p=p))
    if n > 1:
        others = np.delete(np.arange(big_n), first)
        rest = rng.choice(others, size=n - 1, replace=False)
        selected = np.sort(np.concatenate(([first], rest)))
    else:
        selected = np.asarray([first], dtype=np.int64)
    return SampleDesign(selected=selected, pi=pi[selected])


def informative_resample_weights(base_design_weights) -> np.ndarray:
    """Size measures that make selection proportional to existing weights.

    Drawing with probability proportional to a prior survey's design weights
    (inversely proportional to its selection probabilities) induces an
    informative design on the reconstituted population; the mapping is the
    identity on the weight column.
    """
    w = np.asarray(base_design_weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InvalidParameterError("weights must be a nonempty vector")
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise InvalidParameterError("weights must be positive and finite")
    return w.copy()


@dataclass(frozen=True)
class SampleData:
    """Unit records of one drawn sample, as read back from CSV."""

    unit_id: np.ndarray
    area_id: np.ndarray
    z: np.ndarray
    pi: np.ndarray
    w: np.ndarray
    covariates: dict = field(default_factory=dict)
    categorical: tuple = ()


def write_sample_csv(population: Population, design: SampleDesign, path,
                     schema: CSVSchema = CSVSchema()) -> None:
    """Write the selected units with their design quantities to CSV."""
    header = [schema.unit_id, schema.area_id, schema.z, "pi", schema.weight]
    header += list(population.covariates)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, idx in enumerate(design.selected):
            row = [int(population.unit_id[idx]), population.area_id[idx],
                   int(population.z[idx]), repr(float(design.pi[i])),
                   repr(float(design.w[i]))]
            row += [population.covariates[name][idx]
                    for name in population.covariates]
            writer.writerow(row)


def read_sample_csv(path, schema: CSVSchema = CSVSchema()) -> SampleData:
    """Read a sample CSV written by :func:`write_sample_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestionError(f"{path}: empty file, header row required")
        needed = [schema.unit_id, schema.area_id, schema.z, schema.weight]
        needed += list(schema.covariates)
        missing = [c for c in needed if c not in reader.fieldnames]
        if missing:
            raise IngestionError(f"{path}: missing columns {missing}")
        has_pi = "pi" in reader.fieldnames
        unit_id, area_id, z, pi, w = [], [], [], [], []
        covs = {name: [] for name in schema.covariates}
        for lineno, row in enumerate(reader, start=2):
            unit_id.append(_parse_int(row[schema.unit_id], schema.unit_id, lineno))
            area_id.append(row[schema.area_id])
            zval = _parse_int(row[schema.z], schema.z, lineno)
            if zval < 0:
                raise IngestionError(
                    f"row {lineno}: column {schema.z!r} must be nonnegative")
            z.append(zval)
            wval = _parse_float(row[schema.weight], schema.weight, lineno)
            if not wval > 0.0:
                raise IngestionError(
                    f"row {lineno}: column {schema.weight!r} must be positive")
            w.append(wval)
            pi.append(_parse_float(row["pi"], "pi", lineno) if has_pi
                      else 1.0 / wval)
            for name in schema.covariates:
                covs[name].append(row[name])
    if not unit_id:
        raise IngestionError(f"{path}: no data rows")
    covariates = {}
    for name, values in covs.items():
        if name in schema.categorical:
            covariates[name] = _normalize_labels(values)
        else:
            covariates[name] = np.asarray(
                [_parse_float(v, name, i + 2) for i, v in enumerate(values)])
    return SampleData(
        unit_id=np.asarray(unit_id, dtype=np.int64),
        area_id=_normalize_labels(area_id),
        z=np.asarray(z, dtype=np.int64),
        pi=np.asarray(pi),
        w=np.asarray(w),
        covariates=covariates,
        categorical=tuple(schema.categorical),
    )
