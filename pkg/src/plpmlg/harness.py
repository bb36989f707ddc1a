"""Replicated survey-simulation runs: config, execution, report files.

A run fixes one finite population (ingested from CSV or generated
synthetically), repeatedly draws a Midzuno PPS sample from it, fits every
requested method, and aggregates the per-area estimates into the metric
tables. Randomness is keyed by (master seed, replicate index, role), so
results do not depend on execution order or worker count; replicates may
run in worker processes, each writing a private estimates file that is
merged in index order afterwards.

Failure policy is continue-with-logging: a sampler error voids only its
(replicate, method) cell, which is recorded and reported rather than
aborting the run.
"""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from ._version import __version__
from .design import SampleData, midzuno_sample
from .estimators import (METHODS, AreaEstimate, direct_area_estimates,
                         poststratify_totals, replicate_metrics,
                         true_area_totals)
from .exceptions import ConfigurationError, InvalidParameterError
from .ga import GAConfig, ga_predict, run_ga_gibbs
from .gibbs import (ModelData, PLPMLGConfig, model_data_from_sample,
                    run_gibbs, scale_weights)
from .population import (Population, generate_synthetic_population,
                         ingest_population_csv)

__all__ = [
    "SyntheticSpec",
    "RunConfig",
    "run_config_from_mapping",
    "config_to_mapping",
    "load_run_config",
    "save_run_config",
    "sample_model_data",
    "load_population",
    "run_replicates",
    "emit_report",
    "read_estimates_csv",
    "read_truth_csv",
    "metrics_from_files",
    "write_metrics_csv",
    "write_avg_se_csv",
]

logger = logging.getLogger(__name__)

# rng roles, combined with the master seed and replicate index into a
# SeedSequence key; adding a role never disturbs the streams of the others
_ROLE_DESIGN = 0
_ROLE_PL = 1
_ROLE_UW = 2
_ROLE_GA = 3
_ROLE_PL_POST = 4
_ROLE_UW_POST = 5
_ROLE_GA_POST = 6
_ROLE_POPULATION = 7

_EST_COLUMNS = ("replicate", "area_id", "method", "point", "se",
                "flagged_missing")


def _stream(master_seed: int, replicate: int, role: int) -> np.random.Generator:
    key = np.random.SeedSequence((master_seed, replicate, role))
    return np.random.default_rng(key)


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings for a synthetic population.

    ``beta_true`` holds the intercept followed by the dummy coefficients of
    the generated categorical covariate, so its length fixes the number of
    categories (default five).
    """

    n_units: int = 20000
    n_areas: int = 20
    beta_true: tuple = (1.5, -0.15, -0.05, 0.05, 0.15)
    area_sd: float = 0.25
    unit_sd: float = 0.15
    informativeness: float = 6.0

    def __post_init__(self):
        beta = tuple(float(b) for b in np.atleast_1d(self.beta_true))
        if len(beta) == 0:
            raise ConfigurationError("beta_true must be nonempty")
        object.__setattr__(self, "beta_true", beta)
        if self.n_units < 1 or self.n_areas < 1:
            raise ConfigurationError("n_units and n_areas must be positive")
        if self.area_sd < 0 or self.unit_sd < 0:
            raise ConfigurationError("effect scales must be nonnegative")
        if not np.isfinite(self.informativeness):
            raise ConfigurationError("informativeness must be finite")


@dataclass(frozen=True)
class RunConfig:
    """One replicated simulation run.

    Exactly one population source must be set: ``population_csv`` or
    ``synthetic``. The paper-scale protocol constants (sample size 5000,
    50 replicates) are the defaults.
    """

    population_csv: str = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    n_sample: int = 5000
    n_replicates: int = 50
    methods: tuple = METHODS
    master_seed: int = 0
    out_dir: str = "plpmlg_run"
    workers: int = 1
    figure_replicate: int = 0
    vacancy: bool = True
    pl: PLPMLGConfig = field(default_factory=PLPMLGConfig)
    ga: GAConfig = field(default_factory=GAConfig)

    def __post_init__(self):
        if (self.population_csv is None) == (self.synthetic is None):
            raise ConfigurationError(
                "exactly one of population_csv and synthetic must be set")
        methods = tuple(self.methods)
        unknown = sorted(set(methods) - set(METHODS))
        if not methods or unknown:
            raise ConfigurationError(
                f"methods must be a nonempty subset of {METHODS}, "
                f"got {self.methods!r}")
        object.__setattr__(self, "methods", methods)
        if self.n_sample < 1:
            raise ConfigurationError("n_sample must be positive")
        if self.n_replicates < 1:
            raise ConfigurationError("n_replicates must be at least 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        if not 0 <= self.figure_replicate < self.n_replicates:
            raise ConfigurationError(
                "figure_replicate must index an existing replicate")


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, np.generic):
        return value.item()
    return value


def config_to_mapping(config: RunConfig) -> dict:
    """Plain nested mapping of a RunConfig, suitable for YAML."""
    return _plain(asdict(config))


def run_config_from_mapping(doc) -> RunConfig:
    """Build a RunConfig from a parsed config or manifest mapping.

    Manifest files nest the configuration under a ``config`` key; plain
    config files put it at the top level. Unknown keys are rejected rather
    than silently dropped.
    """
    if not isinstance(doc, dict):
        raise ConfigurationError("config file must hold a mapping")
    if isinstance(doc.get("config"), dict):
        doc = doc["config"]
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {unknown}")
    kw = dict(doc)
    try:
        if kw.get("synthetic") is not None:
            kw["synthetic"] = SyntheticSpec(**kw["synthetic"])
        elif kw.get("population_csv") is not None:
            kw["synthetic"] = None
        if "pl" in kw:
            kw["pl"] = PLPMLGConfig(**kw["pl"])
        if "ga" in kw:
            kw["ga"] = GAConfig(**kw["ga"])
    except TypeError as ex:
        raise ConfigurationError(str(ex)) from ex
    if "methods" in kw:
        kw["methods"] = tuple(kw["methods"])
    return RunConfig(**kw)


def load_run_config(path) -> RunConfig:
    """Read a YAML config (or run manifest) file."""
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return run_config_from_mapping(doc)


def save_run_config(config: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_mapping(config), fh, sort_keys=False)


def sample_model_data(sample: SampleData, unweighted: bool = False):
    """ModelData and area labels for fitting a standalone sample CSV.

    Builds the intercept-plus-dummies design from the sample's own
    covariate levels; the area incidence spans the areas present in the
    sample.
    """
    labels, codes = np.unique(sample.area_id, return_inverse=True)
    n = sample.z.shape[0]
    cols = [np.ones(n)]
    for name, arr in sample.covariates.items():
        if name in sample.categorical:
            for lvl in np.unique(arr)[1:]:
                cols.append((arr == lvl).astype(np.float64))
        else:
            cols.append(np.asarray(arr, dtype=np.float64))
    psi = np.zeros((n, labels.shape[0]))
    psi[np.arange(n), codes] = 1.0
    w = np.ones(n) if unweighted else scale_weights(sample.w)
    data = ModelData(Z=sample.z, X=np.column_stack(cols), Psi=psi, w_tilde=w)
    return data, labels


# ---------------------------------------------------------------------------
# replicate execution
# ---------------------------------------------------------------------------


def load_population(config: RunConfig) -> Population:
    """The run's population: ingested from CSV or generated synthetically."""
    if config.population_csv is not None:
        return ingest_population_csv(config.population_csv)
    spec = config.synthetic
    rng = _stream(config.master_seed, 0, _ROLE_POPULATION)
    return generate_synthetic_population(
        spec.n_units, spec.n_areas, np.asarray(spec.beta_true),
        spec.area_sd, spec.unit_sd, spec.informativeness, rng)


def _fit_method(population, design, config: RunConfig, method: str, k: int):
    seed = config.master_seed
    if method == "direct":
        return direct_area_estimates(population, design, config.vacancy)
    if method == "GA":
        data = model_data_from_sample(population, design)
        draws = run_ga_gibbs(data, config.ga, _stream(seed, k, _ROLE_GA))
        pred = ga_predict(draws, population, design, config.ga,
                          _stream(seed, k, _ROLE_GA_POST), config.vacancy)
        return pred.area_estimates()
    if method == "PL-PMLG":
        data = model_data_from_sample(population, design)
        draws = run_gibbs(data, config.pl, _stream(seed, k, _ROLE_PL))
        pred = poststratify_totals(draws, population, design, "PL-PMLG",
                                   _stream(seed, k, _ROLE_PL_POST),
                                   alpha_gauss=config.pl.alpha_gauss,
                                   vacancy=config.vacancy)
        return pred.area_estimates()
    if method == "UW-PMLG":
        data = model_data_from_sample(population, design, unweighted=True)
        draws = run_gibbs(data, config.pl, _stream(seed, k, _ROLE_UW))
        pred = poststratify_totals(draws, population, design, "UW-PMLG",
                                   _stream(seed, k, _ROLE_UW_POST),
                                   alpha_gauss=config.pl.alpha_gauss,
                                   vacancy=config.vacancy)
        return pred.area_estimates()
    raise InvalidParameterError(f"unknown method {method!r}")


def _replicate_rows(population, config: RunConfig, k: int):
    """Estimates and failure records for one replicate."""
    rows, failures = [], []
    try:
        design = midzuno_sample(population, config.n_sample,
                                _stream(config.master_seed, k, _ROLE_DESIGN))
    except Exception as ex:  # noqa: BLE001 - continue-with-logging policy
        logger.warning("replicate %d: sample draw failed: %s", k, ex)
        failures.extend({"replicate": k, "method": m, "error": f"design: {ex}"}
                        for m in config.methods)
        return rows, failures
    for method in config.methods:
        try:
            rows.extend((k, est)
                        for est in _fit_method(population, design, config,
                                               method, k))
        except Exception as ex:  # noqa: BLE001 - continue-with-logging policy
            logger.warning("replicate %d: %s failed: %s", k, method, ex)
            failures.append({"replicate": k, "method": method,
                             "error": str(ex)})
    return rows, failures


def _write_estimate_rows(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_EST_COLUMNS)
        for k, est in rows:
            writer.writerow([k, str(est.area_id), est.method,
                             repr(float(est.point)), repr(float(est.se)),
                             est.flagged_missing])


def read_estimates_csv(path) -> list:
    """Read (replicate, AreaEstimate) pairs from an estimates CSV."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(_EST_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise InvalidParameterError(
                f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            out.append((int(row["replicate"]), AreaEstimate(
                area_id=row["area_id"], point=float(row["point"]),
                se=float(row["se"]), method=row["method"],
                flagged_missing=row["flagged_missing"] == "True")))
    return out


def read_truth_csv(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return {row["area_id"]: float(row["true_total"]) for row in reader}


def metrics_from_files(estimates_path, truth_path, pooled_bias: bool = False):
    """Recompute metric and averaged-SE rows from emitted CSVs."""
    pairs = read_estimates_csv(estimates_path)
    truth = read_truth_csv(truth_path)
    groups = {}
    for k, est in pairs:
        groups.setdefault(k, []).append(est)
    reps = [groups[k] for k in sorted(groups)]
    return replicate_metrics(reps, truth, pooled_bias=pooled_bias)


_WORKER_CTX = {}


def _init_worker(population, config):
    _WORKER_CTX["population"] = population
    _WORKER_CTX["config"] = config


def _run_one_worker(k: int):
    population = _WORKER_CTX["population"]
    config = _WORKER_CTX["config"]
    rows, failures = _replicate_rows(population, config, k)
    path = _part_path(config.out_dir, k)
    _write_estimate_rows(path, rows)
    return k, failures


def _part_path(out_dir, k: int) -> str:
    return os.path.join(out_dir, f".estimates_rep{k:05d}.csv")


def _merge_parts(out_dir, n_replicates: int, dest: str) -> None:
    with open(dest, "w", newline="", encoding="utf-8") as out:
        out.write(",".join(_EST_COLUMNS) + "\n")
        for k in range(n_replicates):
            part = _part_path(out_dir, k)
            with open(part, newline="", encoding="utf-8") as fh:
                next(fh)
                for line in fh:
                    out.write(line)
            os.remove(part)


def write_metrics_csv(path, metric_rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "mse", "abs_bias"])
        for row in metric_rows:
            writer.writerow([row["method"], repr(float(row["mse"])),
                             repr(float(row["abs_bias"]))])


def write_avg_se_csv(path, se_rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "area_id", "avg_se"])
        for row in se_rows:
            se = row["avg_se"]
            writer.writerow([row["method"], str(row["area_id"]),
                             "NA" if se is None else repr(float(se))])


def run_replicates(config: RunConfig):
    """Execute a full replicated run and write every report file.

    Returns ``(metric_rows, se_rows, failures)``; failures is the list of
    logged (replicate, method) cells that raised instead of producing
    estimates.
    """
    population = load_population(config)
    if config.n_sample > population.n_units:
        raise InvalidParameterError(
            f"n_sample={config.n_sample} exceeds population size "
            f"{population.n_units}")
    os.makedirs(config.out_dir, exist_ok=True)
    truth = true_area_totals(population, config.vacancy)

    failures = []
    if config.workers == 1:
        _init_worker(population, config)
        for k in range(config.n_replicates):
            failures.extend(_run_one_worker(k)[1])
    else:
        with ProcessPoolExecutor(max_workers=config.workers,
                                 initializer=_init_worker,
                                 initargs=(population, config)) as pool:
            for _, fails in pool.map(_run_one_worker,
                                     range(config.n_replicates)):
                failures.extend(fails)
    failures.sort(key=lambda f: (f["replicate"], f["method"]))

    estimates_path = os.path.join(config.out_dir, "estimates.csv")
    _merge_parts(config.out_dir, config.n_replicates, estimates_path)
    truth_path = os.path.join(config.out_dir, "truth.csv")
    with open(truth_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["area_id", "true_total"])
        for label in population.area_labels:
            writer.writerow([str(label), repr(float(truth[label]))])

    metric_rows, se_rows = metrics_from_files(estimates_path, truth_path)
    estimate_pairs = read_estimates_csv(estimates_path)
    emit_report(metric_rows, se_rows, estimate_pairs, config, failures)
    return metric_rows, se_rows, failures


def emit_report(metric_rows, se_rows, estimates, config: RunConfig,
                failures=()) -> None:
    """Write the metric, averaged-SE, single-replicate, and manifest files.

    ``estimates`` holds (replicate, AreaEstimate) pairs; the configured
    figure replicate's rows become the per-area point-estimate file.
    """
    if not metric_rows:
        raise InvalidParameterError("metrics must be nonempty")
    out_dir = config.out_dir
    os.makedirs(out_dir, exist_ok=True)
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), metric_rows)
    write_avg_se_csv(os.path.join(out_dir, "avg_se.csv"), se_rows)
    k_fig = config.figure_replicate
    with open(os.path.join(out_dir, f"points_rep{k_fig}.csv"), "w",
              newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["area_id", "method", "point", "se",
                         "flagged_missing"])
        for k, est in estimates:
            if k == k_fig:
                writer.writerow([str(est.area_id), est.method,
                                 repr(float(est.point)),
                                 repr(float(est.se)), est.flagged_missing])
    with open(os.path.join(out_dir, "failures.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "method", "error"])
        for f in failures:
            writer.writerow([f["replicate"], f["method"], f["error"]])
    manifest = {
        "version": __version__,
        "failed_cells": len(failures),
        "failures": _plain(list(failures)),
        "config": config_to_mapping(config),
    }
    with open(os.path.join(out_dir, "manifest.yaml"), "w",
              encoding="utf-8") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=False)
