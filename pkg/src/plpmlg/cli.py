"""Command line entry points.

Four subcommands: ``simulate`` runs the full replicated protocol,
``sample`` draws and writes one PPS sample, ``fit`` runs a single model on
a sample CSV, and ``report`` recomputes the metric tables from previously
emitted estimate files. Flags override config-file values, which override
the built-in defaults. Exit status is 0 on success, 2 when some
(replicate, method) cells failed but the run completed, 1 on fatal errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from .design import midzuno_sample, read_sample_csv, write_sample_csv
from .exceptions import PLPMLGError
from .ga import run_ga_gibbs
from .gibbs import run_gibbs
from .harness import (RunConfig, _ROLE_DESIGN, _stream, load_population,
                      load_run_config, metrics_from_files, run_replicates,
                      sample_model_data, write_avg_se_csv, write_metrics_csv)

__all__ = ["main"]

logger = logging.getLogger(__name__)


def _base_config(args) -> RunConfig:
    config = (load_run_config(args.config) if args.config is not None
              else RunConfig())
    kw = {}
    for attr, key in (("seed", "master_seed"), ("replicates", "n_replicates"),
                      ("sample_size", "n_sample"), ("out", "out_dir"),
                      ("workers", "workers")):
        value = getattr(args, attr, None)
        if value is not None:
            kw[key] = value
    methods = getattr(args, "methods", None)
    if methods is not None:
        kw["methods"] = tuple(m.strip() for m in methods.split(",") if m.strip())
    return replace(config, **kw) if kw else config


def _cmd_simulate(args) -> int:
    config = _base_config(args)
    metric_rows, _, failures = run_replicates(config)
    for row in metric_rows:
        print(f"{row['method']}: mse={row['mse']:.4f} "
              f"abs_bias={row['abs_bias']:.4f}")
    print(f"report files written to {config.out_dir}")
    if failures:
        print(f"{len(failures)} (replicate, method) cell(s) failed; "
              f"see failures.csv")
        return 2
    return 0


def _cmd_sample(args) -> int:
    config = _base_config(args)
    population = load_population(config)
    rng = _stream(config.master_seed, args.replicate, _ROLE_DESIGN)
    design = midzuno_sample(population, config.n_sample, rng)
    write_sample_csv(population, design, args.out)
    print(f"wrote {design.n} sampled units to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    config = _base_config(args)
    sample = read_sample_csv(args.sample)
    data, labels = sample_model_data(sample,
                                     unweighted=args.method == "UW-PMLG")
    if args.method == "GA":
        draws = run_ga_gibbs(data, config.ga, config.master_seed)
    else:
        draws = run_gibbs(data, config.pl, config.master_seed)
    draws.to_csv(args.out)
    print(f"{args.method}: {draws.kept} kept draws over {labels.shape[0]} "
          f"areas written to {args.out}")
    return 0


def _cmd_report(args) -> int:
    metric_rows, se_rows = metrics_from_files(args.estimates, args.truth,
                                              pooled_bias=args.pooled_bias)
    os.makedirs(args.out, exist_ok=True)
    write_metrics_csv(os.path.join(args.out, "metrics.csv"), metric_rows)
    write_avg_se_csv(os.path.join(args.out, "avg_se.csv"), se_rows)
    for row in metric_rows:
        print(f"{row['method']}: mse={row['mse']:.4f} "
              f"abs_bias={row['abs_bias']:.4f}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plpmlg",
        description="Survey-weighted conjugate count models with replicated "
                    "simulation reports")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the replicated protocol")
    sim.add_argument("--config", help="YAML config or manifest file")
    sim.add_argument("--seed", type=int, help="master seed")
    sim.add_argument("--replicates", type=int, help="number of replicates")
    sim.add_argument("--sample-size", type=int, help="units per sample")
    sim.add_argument("--methods", help="comma-separated method subset")
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--workers", type=int, help="concurrent replicate workers")
    sim.set_defaults(func=_cmd_simulate)

    smp = sub.add_parser("sample", help="draw one PPS sample to CSV")
    smp.add_argument("--config", help="YAML config or manifest file")
    smp.add_argument("--seed", type=int, help="master seed")
    smp.add_argument("--sample-size", type=int, help="units to draw")
    smp.add_argument("--replicate", type=int, default=0,
                     help="replicate index whose design stream to use")
    smp.add_argument("--out", required=True, help="sample CSV path")
    smp.set_defaults(func=_cmd_sample)

    fit = sub.add_parser("fit", help="fit one model to a sample CSV")
    fit.add_argument("--sample", required=True, help="sample CSV path")
    fit.add_argument("--method", required=True,
                     choices=["PL-PMLG", "UW-PMLG", "GA"])
    fit.add_argument("--config", help="YAML config or manifest file")
    fit.add_argument("--seed", type=int, help="chain seed")
    fit.add_argument("--out", required=True, help="draws CSV path")
    fit.set_defaults(func=_cmd_fit)

    rep = sub.add_parser("report", help="recompute metrics from estimates")
    rep.add_argument("--estimates", required=True, help="estimates CSV path")
    rep.add_argument("--truth", required=True, help="true-totals CSV path")
    rep.add_argument("--out", required=True, help="output directory")
    rep.add_argument("--pooled-bias", action="store_true",
                     help="absolute value of the pooled mean error instead "
                          "of the per-area average")
    rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PLPMLGError, OSError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
