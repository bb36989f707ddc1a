"""Survey-weighted conjugate Bayesian models for small-area count data.

Multivariate log-Gamma distributions, a pseudo-likelihood Poisson Gibbs
sampler with a boundary correction for zero counts, a shifted-log Gaussian
comparison model, Midzuno PPS sampling, direct survey estimators, and a
replicated simulation harness with CSV reports.
"""

from ._version import __version__
from .design import (SampleData, SampleDesign, informative_resample_weights,
                     midzuno_inclusion_probs, midzuno_sample, read_sample_csv,
                     write_sample_csv)
from .diagnostics import (convergence_report, importance_ess,
                          normalized_importance_weights, split_rhat)
from .estimators import (AreaEstimate, PredictiveTotals,
                         direct_area_estimates, hajek_variance, ht_total,
                         poststratify_totals, replicate_metrics,
                         summarize_total_draws, true_area_totals)
from .exceptions import (CertaintyUnitError, ConfigurationError,
                         DegenerateDesignError, EstimationError,
                         IngestionError, InvalidParameterError, PLPMLGError,
                         PilotFailureError, SamplingFailureError,
                         TruncationFailureError)
from .ga import GAConfig, GADraws, ga_predict, run_ga_gibbs
from .gibbs import (ModelData, PLPMLGConfig, PosteriorDraws,
                    importance_log_weight, log_pseudo_likelihood,
                    model_data_from_sample, run_gibbs, scale_weights)
from .harness import (RunConfig, SyntheticSpec, emit_report,
                      load_population, load_run_config, metrics_from_files,
                      run_replicates, sample_model_data, save_run_config)
from .mlg import (CMLGParams, MLGParams, gaussian_limit_params,
                  log_density_mlg, sample_cmlg,
                  sample_cmlg_truncated_positive, sample_mlg)
from .population import (CSVSchema, Population, generate_synthetic_population,
                         ingest_population_csv, write_population_csv)

__all__ = [
    "__version__",
    "AreaEstimate",
    "CMLGParams",
    "CSVSchema",
    "CertaintyUnitError",
    "ConfigurationError",
    "DegenerateDesignError",
    "EstimationError",
    "GAConfig",
    "GADraws",
    "IngestionError",
    "InvalidParameterError",
    "MLGParams",
    "ModelData",
    "PLPMLGConfig",
    "PLPMLGError",
    "PilotFailureError",
    "Population",
    "PosteriorDraws",
    "PredictiveTotals",
    "RunConfig",
    "SampleData",
    "SampleDesign",
    "SamplingFailureError",
    "SyntheticSpec",
    "TruncationFailureError",
    "convergence_report",
    "direct_area_estimates",
    "emit_report",
    "ga_predict",
    "gaussian_limit_params",
    "generate_synthetic_population",
    "hajek_variance",
    "ht_total",
    "importance_ess",
    "importance_log_weight",
    "informative_resample_weights",
    "ingest_population_csv",
    "load_population",
    "load_run_config",
    "log_density_mlg",
    "log_pseudo_likelihood",
    "metrics_from_files",
    "midzuno_inclusion_probs",
    "midzuno_sample",
    "model_data_from_sample",
    "normalized_importance_weights",
    "poststratify_totals",
    "read_sample_csv",
    "replicate_metrics",
    "run_ga_gibbs",
    "run_gibbs",
    "run_replicates",
    "sample_cmlg",
    "sample_cmlg_truncated_positive",
    "sample_mlg",
    "sample_model_data",
    "save_run_config",
    "scale_weights",
    "split_rhat",
    "summarize_total_draws",
    "true_area_totals",
    "write_population_csv",
    "write_sample_csv",
]
