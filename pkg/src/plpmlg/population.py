"""Finite populations: validated containers, CSV ingestion, synthetic generation.

A population is the frozen frame of reference for one simulation study: unit
identifiers, area labels, nonnegative integer responses, positive size
measures for probability-proportional-to-size sampling, and covariates.
Design matrices are always built against the full population's categorical
levels so that sampled subsets stay column-compatible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import IngestionError, InvalidParameterError

__all__ = [
    "PopulationUnit",
    "Population",
    "CSVSchema",
    "ingest_population_csv",
    "write_population_csv",
    "generate_synthetic_population",
]


@dataclass(frozen=True)
class PopulationUnit:
    """One population unit: identifier, area label, count, size, covariates."""

    unit_id: int
    area_id: object
    z: int
    size_measure: float
    covariates: dict


@dataclass(frozen=True)
class Population:
    """Immutable finite population of count-valued units.

    Parameters
    ----------
    unit_id : ndarray of int64, shape (N,)
        Unique unit identifiers.
    area_id : ndarray, shape (N,)
        Area labels; homogeneous integers or strings.
    z : ndarray of int64, shape (N,)
        Nonnegative integer responses.
    size_measure : ndarray of float64, shape (N,)
        Strictly positive size measures used by PPS designs.
    covariates : dict of str to ndarray
        Unit-level covariate columns, each of length N.
    categorical : tuple of str
        Names in ``covariates`` to dummy-encode (first level dropped).
    """

    unit_id: np.ndarray
    area_id: np.ndarray
    z: np.ndarray
    size_measure: np.ndarray
    covariates: dict = field(default_factory=dict)
    categorical: tuple = ()
    area_labels: np.ndarray = field(init=False, repr=False, compare=False)
    area_codes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        unit_id = np.asarray(self.unit_id, dtype=np.int64)
        area_id = np.asarray(self.area_id)
        z = np.asarray(self.z)
        size = np.asarray(self.size_measure, dtype=np.float64)
        n = unit_id.shape[0]
        if n == 0:
            raise InvalidParameterError("population must contain at least one unit")
        for name, arr in (("area_id", area_id), ("z", z), ("size_measure", size)):
            if arr.shape != (n,):
                raise InvalidParameterError(
                    f"{name} must have shape ({n},), got {arr.shape}")
        if np.unique(unit_id).size != n:
            raise InvalidParameterError("unit_id values must be unique")
        if not np.issubdtype(z.dtype, np.integer):
            zf = np.asarray(z, dtype=np.float64)
            if not np.all(zf == np.floor(zf)):
                raise InvalidParameterError("z must be integer valued")
            z = zf.astype(np.int64)
        else:
            z = z.astype(np.int64)
        if np.any(z < 0):
            raise InvalidParameterError("z must be nonnegative")
        if not np.all(np.isfinite(size)) or np.any(size <= 0.0):
            raise InvalidParameterError("size_measure must be positive and finite")
        covariates = {k: np.asarray(v) for k, v in self.covariates.items()}
        for name, arr in covariates.items():
            if arr.shape != (n,):
                raise InvalidParameterError(
                    f"covariate {name!r} must have shape ({n},), got {arr.shape}")
        categorical = tuple(self.categorical)
        for name in categorical:
            if name not in covariates:
                raise InvalidParameterError(
                    f"categorical name {name!r} is not a covariate")
        labels, codes = np.unique(area_id, return_inverse=True)
        object.__setattr__(self, "unit_id", unit_id)
        object.__setattr__(self, "area_id", area_id)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "size_measure", size)
        object.__setattr__(self, "covariates", covariates)
        object.__setattr__(self, "categorical", categorical)
        object.__setattr__(self, "area_labels", labels)
        object.__setattr__(self, "area_codes", codes.astype(np.int64))

    @property
    def n_units(self) -> int:
        return self.unit_id.shape[0]

    @property
    def n_areas(self) -> int:
        return self.area_labels.shape[0]

    def unit(self, i: int) -> PopulationUnit:
        """Materialize unit ``i`` as a record."""
        return PopulationUnit(
            unit_id=int(self.unit_id[i]),
            area_id=self.area_id[i].item() if hasattr(self.area_id[i], "item")
            else self.area_id[i],
            z=int(self.z[i]),
            size_measure=float(self.size_measure[i]),
            covariates={k: v[i] for k, v in self.covariates.items()},
        )

    def design_columns(self) -> list:
        """Column names of the design matrix, intercept first."""
        names = ["intercept"]
        for name, arr in self.covariates.items():
            if name in self.categorical:
                levels = np.unique(arr)
                names.extend(f"{name}={lvl}" for lvl in levels[1:])
            else:
                names.append(name)
        return names

    def design_matrix(self, indices=None) -> np.ndarray:
        """Design matrix with intercept and drop-first dummy encodings.

        Categorical levels are taken from the full population even when
        ``indices`` selects a subset, so sample and population matrices share
        columns.
        """
        if indices is None:
            indices = slice(None)
            n = self.n_units
        else:
            indices = np.asarray(indices)
            n = indices.shape[0]
        cols = [np.ones(n)]
        for name, arr in self.covariates.items():
            sub = arr[indices]
            if name in self.categorical:
                levels = np.unique(arr)
                for lvl in levels[1:]:
                    cols.append((sub == lvl).astype(np.float64))
            else:
                cols.append(np.asarray(sub, dtype=np.float64))
        return np.column_stack(cols)


@dataclass(frozen=True)
class CSVSchema:
    """Column-name map for population and sample CSV files."""

    unit_id: str = "unit_id"
    area_id: str = "area_id"
    z: str = "z"
    size: str | None = "size"
    weight: str = "weight"
    covariates: tuple = ()
    categorical: tuple = ()


def _parse_int(text: str, column: str, row: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise IngestionError(
            f"row {row}: column {column!r} value {text!r} is not an integer"
        ) from None


def _parse_float(text: str, column: str, row: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise IngestionError(
            f"row {row}: column {column!r} value {text!r} is not a number"
        ) from None


def _normalize_labels(values: list) -> np.ndarray:
    try:
        return np.asarray([int(v) for v in values], dtype=np.int64)
    except (ValueError, TypeError):
        return np.asarray([str(v) for v in values])


def ingest_population_csv(path, schema: CSVSchema = CSVSchema()) -> Population:
    """Read a population from a UTF-8 CSV file with a header row.

    Rows violating the population invariants are rejected with the
    1-indexed data-row number in the error message (the header is row 1).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestionError(f"{path}: empty file, header row required")
        needed = [schema.unit_id, schema.area_id, schema.z]
        needed += list(schema.covariates)
        if schema.size is not None and schema.size in reader.fieldnames:
            size_col = schema.size
        else:
            size_col = None
        missing = [c for c in needed if c not in reader.fieldnames]
        if missing:
            raise IngestionError(f"{path}: missing columns {missing}")
        unit_id, area_id, z, size = [], [], [], []
        covs = {name: [] for name in schema.covariates}
        for lineno, row in enumerate(reader, start=2):
            unit_id.append(_parse_int(row[schema.unit_id], schema.unit_id, lineno))
            area_id.append(row[schema.area_id])
            zval = _parse_int(row[schema.z], schema.z, lineno)
            if zval < 0:
                raise IngestionError(
                    f"row {lineno}: column {schema.z!r} must be nonnegative, "
                    f"got {zval}")
            z.append(zval)
            if size_col is not None:
                sval = _parse_float(row[size_col], size_col, lineno)
                if not sval > 0.0:
                    raise IngestionError(
                        f"row {lineno}: column {size_col!r} must be positive, "
                        f"got {sval}")
                size.append(sval)
            for name in schema.covariates:
                covs[name].append(row[name])
    if not unit_id:
        raise IngestionError(f"{path}: no data rows")
    n = len(unit_id)
    covariates = {}
    for name, values in covs.items():
        if name in schema.categorical:
            covariates[name] = _normalize_labels(values)
        else:
            covariates[name] = np.asarray(
                [_parse_float(v, name, i + 2) for i, v in enumerate(values)])
    try:
        return Population(
            unit_id=np.asarray(unit_id, dtype=np.int64),
            area_id=_normalize_labels(area_id),
            z=np.asarray(z, dtype=np.int64),
            size_measure=np.asarray(size) if size else np.ones(n),
            covariates=covariates,
            categorical=tuple(schema.categorical),
        )
    except InvalidParameterError as exc:
        raise IngestionError(f"{path}: {exc}") from exc


def write_population_csv(population: Population, path,
                         schema: CSVSchema = CSVSchema()) -> None:
    """Write a population to CSV in the ingestion schema."""
    size_col = schema.size if schema.size is not None else "size"
    header = [schema.unit_id, schema.area_id, schema.z, size_col]
    header += list(population.covariates)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(population.n_units):
            row = [int(population.unit_id[i]), population.area_id[i],
                   int(population.z[i]), repr(float(population.size_measure[i]))]
            row += [population.covariates[name][i]
                    for name in population.covariates]
            writer.writerow(row)


def generate_synthetic_population(n_units: int, n_areas: int, beta_true,
                                  area_sd: float, unit_sd: float,
                                  informativeness: float,
                                  rng: np.random.Generator,
                                  size_noise_sd: float = 0.25) -> Population:
    """Generate a Poisson count population with a tunable informative design.

    Units are assigned to areas round robin. When ``beta_true`` has length
    above one, a categorical covariate with ``len(beta_true)`` levels is
    drawn uniformly and enters through drop-first dummies, so ``beta_true``
    is (intercept, level effects...). Log intensities add Normal(0,
    area_sd^2) area effects and Normal(0, unit_sd^2) unit effects. The size
    measure is ``(1 + z) ** informativeness`` times lognormal noise with log
    standard deviation ``size_noise_sd``: informativeness 0 gives a
    noninformative design, positive values correlate selection with the
    response.
    """
    if n_areas < 1 or n_units < n_areas:
        raise InvalidParameterError("need n_units >= n_areas >= 1")
    if area_sd < 0 or unit_sd < 0 or size_noise_sd < 0:
        raise InvalidParameterError("standard deviations must be nonnegative")
    beta_true = np.atleast_1d(np.asarray(beta_true, dtype=np.float64))
    p = beta_true.shape[0]
    if p < 1:
        raise InvalidParameterError("beta_true must have at least one entry")

    area_id = np.arange(n_units, dtype=np.int64) % n_areas
    if p >= 2:
        group = rng.integers(0, p, size=n_units)
        X = np.column_stack(
            [np.ones(n_units)] + [(group == lvl).astype(np.float64)
                                  for lvl in range(1, p)])
        covariates = {"group": group.astype(np.int64)}
        categorical = ("group",)
    else:
        X = np.ones((n_units, 1))
        covariates = {}
        categorical = ()
    eta = rng.normal(0.0, area_sd, size=n_areas)
    xi = rng.normal(0.0, unit_sd, size=n_units)
    log_lam = X @ beta_true + eta[area_id] + xi
    z = rng.poisson(np.exp(log_lam))
    noise = rng.normal(0.0, size_noise_sd, size=n_units)
    size = np.power(1.0 + z, informativeness) * np.exp(noise)
    return Population(
        unit_id=np.arange(n_units, dtype=np.int64),
        area_id=area_id,
        z=z.astype(np.int64),
        size_measure=size,
        covariates=covariates,
        categorical=categorical,
    )
