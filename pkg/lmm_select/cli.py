#!/usr/bin/env python3
"""
Sparse fixed-effects selection for linear mixed models.

Commands:
    simulate   Draw a dataset from the random-intercept benchmark design
    fit        Adaptive ridge fit at one lambda
    path       Regularization path over a lambda grid, BIC choice and plot
    benchmark  Monte-Carlo comparison of adaptive ridge and the L1 baseline

Examples:
    python -m lmm_select simulate --preset paper --seed 3 --out-dir run/
    python -m lmm_select path --data run/data.csv --out-dir run/
    python -m lmm_select benchmark --reps 20 --threads 8 --out-dir bench/

Exit codes: 0 success, 2 invalid input, 3 numerical failure or non-convergence.
"""
import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from sklearn.preprocessing import StandardScaler

from lmm_select import settings
from lmm_select.adaptive_ridge import PenaltyConfig, iwr_fit
from lmm_select.benchmark import resolve_methods, run_benchmark
from lmm_select.exceptions import ConvergenceError, InvalidParameterError, LmmSelectError
from lmm_select.metrics import summary_rows
from lmm_select.model_selection import lambda_grid, regularization_path, select_model
from lmm_select.models import LmmDataset, build_dataset, random_intercept_template
from lmm_select.reports import (
    check_output_dir,
    format_table,
    plot_path_svg,
    path_frame,
    read_dataset_csv,
    write_benchmark_outputs,
    write_csv,
    write_dataset_csv,
    write_json,
)
from lmm_select.simulate import DEFAULT_BETA_TRUE, DEFAULT_P_TOTAL, default_scenario, scenario_with, simulate_dataset

logger = logging.getLogger(__name__)

EXIT_OK = 0
DEFAULT_BENCHMARK_LAMBDAS = 25

# Options that do not change any computed number and stay out of provenance
_UNRECORDED = ('command', 'log_level')


@dataclass(frozen=True)
class RunConfig:
    """Resolved options of one command, embedded verbatim in every output."""

    command: str
    options: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> 'RunConfig':
        options = {
            key: (str(value) if isinstance(value, Path) else value)
            for key, value in sorted(vars(args).items())
            if key not in _UNRECORDED
        }
        config = cls(command=args.command, options=options)
        config.validate()
        return config

    def validate(self):
        o = self.options
        if o.get('threads') is not None and o['threads'] == 0:
            raise InvalidParameterError("--threads must be a positive count (or negative for joblib's all-but-n)")
        if o.get('reps') is not None and o['reps'] < 1:
            raise InvalidParameterError(f"--reps must be >= 1, got {o['reps']}")
        if o.get('lambda_count') is not None and o['lambda_count'] < 2:
            raise InvalidParameterError(f"--lambda-count must be >= 2, got {o['lambda_count']}")
        if 'lambda_min' in o and not 0 < o['lambda_min'] < o['lambda_max']:
            raise InvalidParameterError(
                f"need 0 < --lambda-min < --lambda-max, got {o['lambda_min']} and {o['lambda_max']}"
            )
        if 'lam' in o or 'penalty_power' in o:
            self.penalty()
        if 'preset' in o:
            _scenario_overrides(o)

    def penalty(self) -> PenaltyConfig:
        o = self.options
        return PenaltyConfig(
            lam=o.get('lam', 1.0),
            delta=o.get('delta', settings.DELTA),
            penalty_power=o.get('penalty_power', 0.0),
            tau=o.get('tau', 2.0),
        )

    def to_dict(self) -> dict:
        return {'command': self.command, **self.options}


# Scenario flags and the scenario_with keyword each one sets
_SCENARIO_FLAGS = {
    'groups': 'n_groups',
    'obs': 'obs_per_group',
    'p_total': 'p_total',
    'beta_true': 'beta_true',
    'sigma': 'sigma',
    'gamma_var': 'gamma_var',
}


def _scenario_overrides(options: dict) -> dict:
    """scenario_with keywords for the scenario flags given on the command line."""
    overrides = {kw: options[flag] for flag, kw in _SCENARIO_FLAGS.items() if options.get(flag) is not None}
    if overrides and options.get('preset') == 'paper':
        given = ', '.join('--' + flag.replace('_', '-') for flag in _SCENARIO_FLAGS if options.get(flag) is not None)
        raise InvalidParameterError(f"--preset paper fixes the design; drop {given} or use --preset custom")
    return overrides


def _scenario(config: RunConfig):
    o = config.options
    overrides = _scenario_overrides(o)
    if o['preset'] == 'custom' or overrides:
        return scenario_with(seed=o['seed'], **overrides)
    return default_scenario(o['seed'])


def _load(config: RunConfig) -> Tuple[LmmDataset, list, Optional[np.ndarray]]:
    """Read the data file; with --standardize, scale covariates to unit SD."""
    data, names = read_dataset_csv(config.options['data'])
    if not config.options.get('standardize') or data.p == 0:
        return data, names, None
    scaler = StandardScaler(with_mean=False).fit(data.X)
    scaled = build_dataset(data.y, scaler.transform(data.X), data.Z, data.groups, n_groups=data.n_groups)
    logger.info(f"Standardized {data.p} covariates (scale only)")
    return scaled, names, scaler.scale_


def _named(names, values) -> dict:
    return {name: value for name, value in zip(names, np.asarray(values).tolist())}


def cmd_simulate(config: RunConfig) -> int:
    print("=== Simulate ===")
    out_dir = check_output_dir(config.options['out_dir'])
    scenario = _scenario(config)
    simulated = simulate_dataset(scenario)
    names = simulated.covariate_names
    record = config.to_dict()

    write_dataset_csv(out_dir / 'data.csv', simulated.dataset, names, record)
    write_json(out_dir / 'truth.json', simulated.to_dict(), record)
    write_json(out_dir / 'scenario.json', scenario.to_dict(), record)
    print(f"✓ {scenario.n_obs} observations, {scenario.n_groups} groups, {scenario.p_total} covariates")
    print(f"✓ Wrote data.csv, truth.json, scenario.json to {out_dir}")
    return EXIT_OK


def cmd_fit(config: RunConfig) -> int:
    print("=== Fit ===")
    out = Path(config.options['out'])
    check_output_dir(out.parent)
    data, names, scale = _load(config)
    template = random_intercept_template(data.n_groups)
    result = iwr_fit(data, template, config.penalty())

    beta = result.beta if scale is None else result.beta / scale
    report = {
        'lambda': result.lam,
        'converged': result.converged,
        'diagnostic': result.diagnostic,
        'outer_iters': result.outer_iters,
        'beta': _named(names, beta),
        'theta': result.theta,
        'sigma2': result.sigma2,
        'selection_indicator': _named(names, result.selection_indicator),
        'relevance': _named(names, result.relevance),
        'active_set': [name for name, flag in zip(names, result.active_set) if flag],
        'minus2_profiled_loglik': result.minus2_profiled_loglik,
        'penalized_objective': result.penalized_objective,
        'trace': [
            {
                'iteration': step.iteration,
                'objective': step.objective,
                'indicator_change': step.indicator_change,
                'inner_iterations': step.inner_iterations,
                'inner_converged': step.inner_converged,
                'retried': step.retried,
            }
            for step in result.trace
        ],
    }
    write_json(out, report, config.to_dict())
    print(f"✓ {result.n_active} of {data.p} covariates selected after {result.outer_iters} outer iterations")
    print(f"✓ Wrote {out}")
    if not result.converged:
        raise ConvergenceError(f"fit did not converge: {result.diagnostic}")
    return EXIT_OK


def cmd_path(config: RunConfig) -> int:
    print("=== Path ===")
    o = config.options
    out_dir = check_output_dir(o['out_dir'])
    data, names, scale = _load(config)
    template = random_intercept_template(data.n_groups)
    grid = lambda_grid(o['lambda_min'], o['lambda_max'], o['lambda_count'])
    path = regularization_path(
        data, template, grid, config.penalty(), warm_start=not o['no_warm_start'], n_jobs=o['threads']
    )
    chosen = select_model(path)
    record = config.to_dict()

    write_csv(out_dir / 'path.csv', path_frame(path, names, scale), record)
    plot_path_svg(out_dir / 'path.svg', path, names, scale)
    refit_beta = chosen.params.beta if scale is None else chosen.params.beta / scale
    write_json(out_dir / 'chosen.json', {
        'index': chosen.index,
        'lambda': chosen.lam,
        'active_set': [name for name, flag in zip(names, chosen.active_set) if flag],
        'beta': _named(names, refit_beta),
        'theta': chosen.params.theta,
        'sigma2': chosen.params.sigma2,
        'loglik': chosen.loglik,
        'bic': chosen.bic,
    }, record)

    not_converged = int((~path.converged).sum())
    if not_converged:
        print(f"⚠ {not_converged} of {grid.size} lambdas did not converge")
    print(f"✓ BIC minimum at lambda={chosen.lam:.6g}: {int(chosen.active_set.sum())} covariates selected")
    print(f"✓ Wrote path.csv, path.svg, chosen.json to {out_dir}")
    return EXIT_OK


def cmd_benchmark(config: RunConfig) -> int:
    print("=== Benchmark ===")
    o = config.options
    out_dir = check_output_dir(o['out_dir'])
    methods = resolve_methods(o['methods'])
    grid = lambda_grid(settings.LAMBDA_MIN, settings.LAMBDA_MAX, o['lambda_count'])
    report = run_benchmark(_scenario(config), o['reps'], o['seed'], methods, grid, n_jobs=o['threads'])
    write_benchmark_outputs(out_dir, report, config.to_dict())

    for method in report.methods:
        effective = report.effective_replications(method)
        marker = '✓' if effective == o['reps'] else '⚠'
        print(f"{marker} {method}: {effective}/{o['reps']} replications")
    summaries = [report.summaries[m] for m in report.methods if report.summaries[m] is not None]
    if summaries:
        print()
        print(format_table(summary_rows(summaries)))
    print(f"✓ Wrote benchmark outputs to {out_dir}")
    return EXIT_OK


def _add_scenario_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--preset", choices=["paper", "custom"],
                        help="paper: 90 groups, 300 observations, 54 covariates (used when no design flag is given); "
                             "custom: the default design changed by the flags below")
    parser.add_argument("--seed", type=int, default=3, help="Seed (default: 3)")
    parser.add_argument("--groups", type=int, help="Number of groups (default: 90)")
    parser.add_argument("--obs", type=int, help="Observations per group (default: spread 300 over the groups)")
    parser.add_argument("--p-total", type=int, help=f"Number of covariates (default: {DEFAULT_P_TOTAL})")
    parser.add_argument("--beta-true", type=float, nargs="+",
                        help=f"Nonzero coefficients of the leading covariates (default: {' '.join(f'{b:g}' for b in DEFAULT_BETA_TRUE)})")
    parser.add_argument("--sigma", type=float, help="Residual SD (default: 1)")
    parser.add_argument("--gamma-var", type=float, help="Random-intercept variance (default: 1)")


def _add_penalty_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--penalty-power", type=float, default=0.0,
                        help="Weight family: 0 adaptive ridge (L0-like), 1 L1-like, 2 plain ridge (default: 0)")
    parser.add_argument("--tau", type=float, default=2.0, help="Weight exponent tau (default: 2)")
    parser.add_argument("--delta", type=float, default=settings.DELTA, help=f"Weight offset (default: {settings.DELTA})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmm_select",
        description="Sparse fixed-effects selection for linear mixed models",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=settings.LOG_LEVEL, help=f"Logging level (default: {settings.LOG_LEVEL})")
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    simulate_parser = subparsers.add_parser("simulate", parents=[common], help="Draw a simulated dataset")
    _add_scenario_arguments(simulate_parser)
    simulate_parser.add_argument("--out-dir", type=Path, required=True, help="Existing output directory")

    fit_parser = subparsers.add_parser("fit", parents=[common], help="Adaptive ridge fit at one lambda")
    fit_parser.add_argument("--data", type=Path, required=True, help="Dataset CSV (group, y, covariates)")
    fit_parser.add_argument("--lambda", dest="lam", type=float, default=1.0, help="Regularization strength (default: 1)")
    _add_penalty_arguments(fit_parser)
    fit_parser.add_argument("--standardize", action="store_true", help="Scale covariates to unit SD before fitting")
    fit_parser.add_argument("--out", type=Path, default=Path("fit.json"), help="Report path (default: fit.json)")

    path_parser = subparsers.add_parser("path", parents=[common], help="Regularization path with BIC choice")
    path_parser.add_argument("--data", type=Path, required=True, help="Dataset CSV (group, y, covariates)")
    path_parser.add_argument("--lambda-min", type=float, default=settings.LAMBDA_MIN, help="Smallest lambda (default: 0.01)")
    path_parser.add_argument("--lambda-max", type=float, default=settings.LAMBDA_MAX, help="Largest lambda (default: 100)")
    path_parser.add_argument("--lambda-count", type=int, default=settings.LAMBDA_COUNT, help="Grid size (default: 100)")
    _add_penalty_arguments(path_parser)
    path_parser.add_argument("--no-warm-start", action="store_true", help="Fit every lambda from the cold start, in parallel")
    path_parser.add_argument("--standardize", action="store_true", help="Scale covariates to unit SD before fitting")
    path_parser.add_argument("--threads", type=int, default=settings.THREADS, help="Worker count")
    path_parser.add_argument("--out-dir", type=Path, required=True, help="Existing output directory")

    benchmark_parser = subparsers.add_parser("benchmark", parents=[common], help="Monte-Carlo comparison of selection methods")
    _add_scenario_arguments(benchmark_parser)
    benchmark_parser.add_argument("--reps", type=int, default=20, help="Replications (default: 20)")
    benchmark_parser.add_argument("--lambda-count", type=int, default=DEFAULT_BENCHMARK_LAMBDAS,
                                  help=f"Grid size per replication (default: {DEFAULT_BENCHMARK_LAMBDAS})")
    benchmark_parser.add_argument("--methods", nargs="+", default=["iwr", "l1"], help="Methods: iwr, l1 (default: both)")
    benchmark_parser.add_argument("--threads", type=int, default=settings.THREADS, help="Worker count")
    benchmark_parser.add_argument("--out-dir", type=Path, required=True, help="Existing output directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_OK

    logging.basicConfig(level=args.log_level.upper(), format=settings.LOG_FORMAT)

    commands = {
        "simulate": cmd_simulate,
        "fit": cmd_fit,
        "path": cmd_path,
        "benchmark": cmd_benchmark,
    }

    try:
        config = RunConfig.from_args(args)
        return commands[args.command](config)
    except LmmSelectError as e:
        print(f"❌ {e.message}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
