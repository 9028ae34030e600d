"""
Command-line entry point.

    python cli.py quantile --N 512 --alpha 0.01 --method mc --trials 100000 --seed 7
    python cli.py detect --input obs.json --nuisance zero.json --seed 1
    python cli.py table2 --N 256 --trials 2000 --seed 1 --output table2.csv
    python cli.py table1 --preset table1-128 --seed 1
    python cli.py verify --seed 0 --scale reduced
    python cli.py gen --N 128 --d 4 --seed 3 --noise --output obs.json

Exit codes: 0 success, 1 failed verification or computation, 2 usage error.
"""

import argparse
import json
import logging
import sys

import numpy as np

from detection_algorithms import BASIC, ENERGY, create_detection_algorithms
from experiment_harness import (
    TABLE1_COLUMNS,
    TABLE2_COLUMNS,
    ExperimentConfig,
    get_preset,
    make_observation,
    table1_experiment,
    table2_sweep,
)
from harmonics.errors import HarmonicsError
from harmonics.frequencies import random_eps_signal, random_spec, sample_signal
from harmonics.nuisance import NuisanceSpec
from lemma_verification import run_all_suites
from utils.noise import substream
from utils.persistence import (
    load_json,
    load_observation,
    load_threshold_table,
    observation_to_dict,
    records_to_csv,
    save_json,
    save_threshold_table,
)
from utils.quantiles import FORMULA_BOUND, MONTE_CARLO, chi2_quantile, monte_carlo_quantile, q_bound

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Invalid combination of command-line arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _dumps(data):
    return json.dumps(data, indent=2, sort_keys=True)


def _add_experiment_arguments(parser):
    parser.add_argument("--preset", help="Named configuration from experiment_presets.json")
    parser.add_argument("--config", help="JSON file with ExperimentConfig fields")
    parser.add_argument("--N", type=int)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--d-s", dest="d_s", type=int)
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--threshold-method", choices=[MONTE_CARLO, FORMULA_BOUND])
    parser.add_argument("--threshold-trials", type=int)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--output", help="CSV path (default: stdout)")
    parser.add_argument("--summary", help="Write the summary JSON to this path")
    parser.add_argument("--cache", help="Threshold cache file (read and updated)")


def build_parser():
    parser = _Parser(prog="harmonic-detect", description="Detection of harmonic oscillations in white noise")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    detect = sub.add_parser("detect", help="Run the tests on one observation")
    detect.add_argument("--input", required=True, help="Observation file (JSON, CSV or XLSX)")
    detect.add_argument("--nuisance", help="Nuisance spec JSON (default: zero)")
    detect.add_argument("--test", choices=[BASIC, ENERGY, "both"], default="both")
    detect.add_argument("--alpha", type=float, default=0.01)
    detect.add_argument("--method", choices=[MONTE_CARLO, FORMULA_BOUND, "user"], default=MONTE_CARLO)
    detect.add_argument("--threshold", type=float, help="Basic-test threshold for --method user")
    detect.add_argument("--energy-threshold", type=float)
    detect.add_argument("--energy-dof", choices=["full", "reduced"], default="full")
    detect.add_argument("--trials", type=int, default=100000)
    detect.add_argument("--seed", type=int)
    detect.add_argument("--cache")

    quantile = sub.add_parser("quantile", help="Print detection thresholds")
    quantile.add_argument("--N", type=int, required=True)
    quantile.add_argument("--alpha", type=float, required=True)
    quantile.add_argument("--method", choices=[MONTE_CARLO, FORMULA_BOUND, "chi2", "all"], default="all")
    quantile.add_argument("--trials", type=int, default=100000)
    quantile.add_argument("--seed", type=int)

    table1 = sub.add_parser("table1", help="Near-minimal detectable shifts against eps-set nuisances")
    _add_experiment_arguments(table1)
    table1.add_argument("--experiments", type=int)
    table1.add_argument("--d-n", dest="d_n", type=int)
    table1.add_argument("--eps-n", dest="eps_n", type=float)

    table2 = sub.add_parser("table2", help="Power sweep of the basic and energy tests")
    _add_experiment_arguments(table2)
    table2.add_argument("--trials", type=int)
    table2.add_argument("--mode", dest="signal_mode", choices=["random", "bad"])
    table2.add_argument("--rho-max", dest="rho_max", type=float)
    table2.add_argument("--rho-step", dest="rho_step", type=float)

    verify = sub.add_parser("verify", help="Run the verification suites")
    verify.add_argument("--seed", type=int, required=True)
    verify.add_argument("--scale", choices=["full", "reduced"], default="full")
    verify.add_argument("--suite", action="append", dest="suites",
                        choices=["divisible", "factor", "autoconvolution", "decomposition", "concentration"])
    verify.add_argument("--output")

    gen = sub.add_parser("gen", help="Generate a synthetic observation")
    gen.add_argument("--N", type=int, required=True)
    gen.add_argument("--d", type=int, default=4)
    gen.add_argument("--eps", type=float, default=0.0, help="Draw from the eps-set instead of the subspace")
    gen.add_argument("--amplitude", type=float, default=1.0, help="Peak of the generated signal")
    gen.add_argument("--noise", action="store_true", help="Add standard Gaussian noise")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--output")
    gen.add_argument("--nuisance-out", help="Write the matching nuisance spec here")
    return parser


def _emit(text, path, stdout):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text if text.endswith("\n") else text + "\n")
    else:
        stdout.write(text if text.endswith("\n") else text + "\n")


def _experiment_config(args, problem):
    if args.config:
        data = load_json(args.config)
    elif args.preset:
        data = get_preset(args.preset).to_dict()
    else:
        data = {'problem': problem}
    keys = ['N', 'alpha', 'd_s', 'seed', 'threshold_method', 'threshold_trials',
            'experiments', 'd_n', 'eps_n', 'trials', 'signal_mode', 'rho_max', 'rho_step']
    data.update({k: getattr(args, k) for k in keys if getattr(args, k, None) is not None})
    cfg = ExperimentConfig.from_dict(data)
    if cfg.problem != problem and not (problem == "N1" and cfg.problem == "N2"):
        raise UsageError(f"Configuration problem {cfg.problem} does not match this command")
    return cfg


def _run_detect(args, stdout):
    if args.method == MONTE_CARLO and args.seed is None:
        raise UsageError("detect: --seed is required for Monte Carlo thresholds")
    if args.method == "user" and args.threshold is None:
        raise UsageError("detect: --threshold is required with --method user")
    y = load_observation(args.input)
    Z = NuisanceSpec.from_dict(load_json(args.nuisance)) if args.nuisance else NuisanceSpec.zero()
    table = load_threshold_table(args.cache) if args.cache else None
    detectors = create_detection_algorithms(table)
    params = {
        'alpha': args.alpha,
        'threshold_method': args.method,
        'threshold_trials': args.trials,
        'threshold_seed': args.seed,
        'threshold': args.threshold,
        'energy_threshold': args.energy_threshold,
        'energy_dof': args.energy_dof,
    }
    tests = (BASIC, ENERGY) if args.test == "both" else (args.test,)
    outcomes = detectors.run_tests(y, Z, tests=tests, params=params)
    if args.cache:
        save_threshold_table(detectors.table, args.cache)
    result = {'N': int(len(y)), 'nuisance': Z.to_dict()}
    result.update({kind: outcome.to_dict() for kind, outcome in outcomes.items()})
    _emit(_dumps(result), None, stdout)
    return EXIT_OK


def _run_quantile(args, stdout):
    if args.method in (MONTE_CARLO, "all") and args.seed is None:
        raise UsageError("quantile: --seed is required for Monte Carlo thresholds")
    result = {'N': args.N, 'alpha': args.alpha}
    if args.method in (FORMULA_BOUND, "all"):
        result['bound'] = q_bound(args.N, args.alpha)
    if args.method in (MONTE_CARLO, "all"):
        estimate = monte_carlo_quantile(args.N, args.alpha, args.trials, args.seed)
        result['mc'] = {
            'value': estimate.value,
            'trials': estimate.trials,
            'seed': estimate.seed,
            'order': estimate.order,
            'delta_safety': estimate.delta_safety,
        }
    if args.method in ("chi2", "all"):
        result['chi2'] = chi2_quantile(args.N, args.alpha)
    _emit(_dumps(result), None, stdout)
    return EXIT_OK


def _run_table(args, stdout, problem):
    cfg = _experiment_config(args, problem)
    table = load_threshold_table(args.cache) if args.cache else None
    if problem == "P1":
        records = table2_sweep(cfg, workers=args.workers, table=table)
        columns = TABLE2_COLUMNS
    else:
        records = table1_experiment(cfg, workers=args.workers, table=table)
        columns = TABLE1_COLUMNS
    if args.cache and table is not None:
        save_threshold_table(table, args.cache)
    text = records_to_csv(records[columns])
    _emit(text, args.output, stdout)
    if args.summary:
        summary = {k: v for k, v in records.attrs.items() if k != 'runtime_s'}
        summary['config'] = cfg.to_dict()
        save_json(summary, args.summary)
    return EXIT_OK


def _run_verify(args, stdout):
    report = run_all_suites(args.seed, scale=args.scale, suites=args.suites)
    _emit(_dumps(report), args.output, stdout)
    return EXIT_OK if report['passed'] else EXIT_FAILED


def _run_gen(args, stdout):
    rng = substream(args.seed, "gen")
    spec = random_spec(args.d, rng)
    w = spec.collection()
    if args.eps > 0:
        x = random_eps_signal(w, args.N, args.eps, rng)[w.d:]
        Z = NuisanceSpec.eps_set(w, args.eps)
    else:
        x = sample_signal(spec, args.N)
        Z = NuisanceSpec.subspace(w)
    peak = float(np.max(np.abs(x)))
    if peak > 0:
        x = x * (args.amplitude / peak)
    if args.noise:
        x = make_observation(x, args.seed, 0)
    data = observation_to_dict(x)
    data['freqs'] = w.to_list()
    _emit(_dumps(data), args.output, stdout)
    if args.nuisance_out:
        save_json(Z.to_dict(), args.nuisance_out)
    return EXIT_OK


def run_cli(argv=None, stdout=None, stderr=None):
    """
    Parse arguments and run one subcommand.

    Returns:
        Exit code: 0 success, 1 failed verification or computation, 2 usage error
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        stderr.write(f"{e}\n")
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    logging.basicConfig(stream=stderr, level=getattr(logging, args.log_level),
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    if args.command is None:
        stderr.write(parser.format_usage())
        return EXIT_USAGE

    handlers = {
        'detect': _run_detect,
        'quantile': _run_quantile,
        'table1': lambda a, out: _run_table(a, out, "N1"),
        'table2': lambda a, out: _run_table(a, out, "P1"),
        'verify': _run_verify,
        'gen': _run_gen,
    }
    try:
        return handlers[args.command](args, stdout)
    except UsageError as e:
        stderr.write(f"{e}\n")
        return EXIT_USAGE
    except (ValueError, FileNotFoundError, KeyError) as e:
        stderr.write(f"{args.command}: {e}\n")
        return EXIT_USAGE
    except (HarmonicsError, RuntimeError) as e:
        stderr.write(f"{args.command}: {e}\n")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(run_cli())
