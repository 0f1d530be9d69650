"""Command-line driver: parse, dispatch, serialize.

Exit codes: 0 success, 2 usage error, 3 missing or invalid input file,
4 numerical failure (breakdown, non-symmetric operator, degenerate input),
5 output error.  Failures emit one machine-readable JSON record on stderr.
Identical configurations produce byte-identical output files; the only
exception is the cost-study command, whose wall-clock columns are inherently
machine- and run-dependent (its flop columns are deterministic).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import reports
from .calibration import (
    CalibrationConfig,
    calibration_scenarios,
    cost_factor_study,
    run_calibration,
)
from .errors import BreakdownError, LabError, UsageError
from .gaussian import all_weights, make_weight
from .invariants import run_invariants
from .oracle import conditioning_comparison
from .pinv import PinvStudyConfig, run_pinv_study
from .problems import random_spd_problem
from .solver import PriorSpec, TerminationPolicy, bayescg_solve, make_prior

COMMANDS = ("solve", "calibrate", "oracle-compare", "pinv-study", "cost-study", "invariants")

PRIOR_CHOICES = ("identity", "natural", "inverse-a", "sparse-diag")
WEIGHT_CHOICES = {"euclid": "euclidean", "a": "a", "sigma0": "sigma0",
                  "asigma0at": "a_sigma0_at", "all": "all"}

_EPILOG = """exit codes:
  0  success
  2  usage error (bad flag, conflicting flags, unknown config key)
  3  missing or unreadable input file
  4  numerical failure (breakdown, non-symmetric operator, degenerate data)
  5  output could not be written

BAYESCG_LAB_THREADS caps replication-level parallelism (default 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class _Once(argparse.Action):
    """Reject repeated flags instead of silently keeping the last value."""

    def __call__(self, parser, namespace, values, option_string=None):
        if getattr(namespace, f"_seen_{self.dest}", False):
            raise UsageError(f"conflicting duplicate flag {option_string}")
        setattr(namespace, f"_seen_{self.dest}", True)
        setattr(namespace, self.dest, values)


_DEFAULTS: dict[str, dict] = {
    "solve": {"d": 50, "seed": 0, "prior": "identity", "cond": 100.0,
              "residual_tol": 1e-10, "trace_tol": 1e-12, "max_iters": None,
              "problem_file": None, "format": "csv"},
    "calibrate": {"d": 20, "m": 5, "seed": 0, "replications": 2000,
                  "prior": "identity", "generating_prior": "identity",
                  "policy": "independent", "scenario": None, "cond": 100.0,
                  "format": "csv"},
    "oracle-compare": {"d": 12, "seed": 0, "prior": "identity", "weight": "all",
                       "cond": 100.0, "format": "csv"},
    "pinv-study": {"c": 10, "d": 8, "rank": 4, "seed": 0, "replications": 20,
                   "prior": "identity", "b_out_of_range": False, "format": "csv"},
    "cost-study": {"d": 1000, "seed": 0, "iters": None, "trials": 5, "format": "csv"},
    "invariants": {"d": 20, "seed": 0, "problems": 1, "format": "csv"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    options: dict
    out: str

    def echo(self) -> dict:
        return {"command": self.command, "out": self.out,
                **{k: v for k, v in sorted(self.options.items())}}


def build_parser() -> _Parser:
    parser = _Parser(prog="bayescg-lab",
                     description="Bayesian conjugate gradient experiment lab",
                     epilog=_EPILOG,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(cmd, *flags):
        p = sub.add_parser(cmd, epilog=_EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", default=None, help="JSON config file; flags override it")
        p.add_argument("--out", action=_Once, default=None, help="output path (required)")
        p.add_argument("--format", action=_Once, default=None, choices=("csv", "json"))
        p.add_argument("--seed", action=_Once, default=None, type=int)
        for flag in flags:
            flag(p)
        return p

    def d(p): p.add_argument("--d", action=_Once, default=None, type=int, help="problem dimension")
    def c(p): p.add_argument("--c", action=_Once, default=None, type=int, help="row count")
    def rank(p): p.add_argument("--rank", action=_Once, default=None, type=int)
    def m(p): p.add_argument("--m", action=_Once, default=None, type=int, help="conditioning steps")
    def reps(p): p.add_argument("--replications", action=_Once, default=None, type=int)
    def prior(p): p.add_argument("--prior", action=_Once, default=None,
                                 help="identity | natural | inverse-a | sparse-diag | file:PATH")
    def cond(p): p.add_argument("--cond", action=_Once, default=None, type=float,
                                help="condition number of generated operators")

    add("solve", d, prior, cond,
        lambda p: p.add_argument("--residual-tol", action=_Once, default=None, type=float,
                                 dest="residual_tol"),
        lambda p: p.add_argument("--trace-tol", action=_Once, default=None, type=float,
                                 dest="trace_tol"),
        lambda p: p.add_argument("--max-iters", action=_Once, default=None, type=int,
                                 dest="max_iters"),
        lambda p: p.add_argument("--problem-file", action=_Once, default=None,
                                 dest="problem_file", help="read the system from a problem file"))
    add("calibrate", d, m, reps, prior, cond,
        lambda p: p.add_argument("--generating-prior", action=_Once, default=None,
                                 dest="generating_prior"),
        lambda p: p.add_argument("--policy", action=_Once, default=None,
                                 choices=("independent", "krylov")),
        lambda p: p.add_argument("--scenario", action=_Once, default=None,
                                 help="named scenario; overrides both priors"))
    add("oracle-compare", d, prior, cond,
        lambda p: p.add_argument("--weight", action=_Once, default=None,
                                 choices=tuple(WEIGHT_CHOICES)))
    add("pinv-study", c, d, rank, reps, prior,
        lambda p: p.add_argument("--b-out-of-range", action="store_const", const=True,
                                 default=None, dest="b_out_of_range",
                                 help="draw b outside range(A)"))
    add("cost-study", d,
        lambda p: p.add_argument("--iters", action=_Once, default=None, type=int),
        lambda p: p.add_argument("--trials", action=_Once, default=None, type=int))
    add("invariants", d,
        lambda p: p.add_argument("--problems", action=_Once, default=None, type=int))
    return parser


def parse_config(argv) -> ExperimentConfig:
    """Merge flags over an optional config file over per-command defaults."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError("a command is required (solve, calibrate, oracle-compare, "
                         "pinv-study, cost-study, invariants)")
    defaults = dict(_DEFAULTS[ns.command])
    file_values = {}
    if ns.config is not None:
        if not os.path.isfile(ns.config):
            raise FileNotFoundError(ns.config)
        with open(ns.config) as handle:
            try:
                file_values = json.load(handle)
            except json.JSONDecodeError as exc:
                raise UsageError(f"config file {ns.config} is not valid JSON: {exc}") from exc
        known = set(defaults) | {"seed", "out", "format"}
        unknown = set(file_values) - known
        if unknown:
            raise UsageError(
                f"unknown config keys for {ns.command}: {', '.join(sorted(unknown))}")

    options = dict(defaults)
    options["seed"] = 0
    out = None
    for key, value in file_values.items():
        if key == "out":
            out = value
        else:
            options[key] = value
    for key in list(options):
        flag_value = getattr(ns, key, None)
        if flag_value is not None:
            options[key] = flag_value
    if ns.out is not None:
        out = ns.out
    if out is None:
        raise UsageError("--out is required")

    prior_value = options.get("prior")
    if prior_value is not None and prior_value not in PRIOR_CHOICES \
            and not str(prior_value).startswith("file:"):
        raise UsageError(f"--prior must be one of {PRIOR_CHOICES} or file:PATH, "
                         f"got {prior_value!r}")
    gen_value = options.get("generating_prior")
    if gen_value is not None and gen_value not in PRIOR_CHOICES \
            and not str(gen_value).startswith("file:"):
        raise UsageError(f"--generating-prior must be one of {PRIOR_CHOICES} or file:PATH")
    for key in ("problem_file",):
        path = options.get(key)
        if path is not None and not os.path.isfile(path):
            raise FileNotFoundError(path)
    for key in ("prior", "generating_prior"):
        value = options.get(key)
        if isinstance(value, str) and value.startswith("file:"):
            path = value[len("file:"):]
            if not os.path.isfile(path):
                raise FileNotFoundError(path)
    return ExperimentConfig(ns.command, options, out)


def _resolve_prior(token: str, d: int) -> PriorSpec:
    if token == "identity":
        return PriorSpec.identity()
    if token == "natural":
        return PriorSpec.natural()
    if token == "inverse-a":
        return PriorSpec.inverse_a()
    if token == "sparse-diag":
        return PriorSpec.sparse_diagonal(np.ones(d))
    if token.startswith("file:"):
        return PriorSpec.user(reports.read_matrix_file(token[len("file:"):]))
    raise UsageError(f"unknown prior {token!r}")


def _emit(config: ExperimentConfig, columns: list[str], rows: list[list],
          summary: dict | None = None, extra: dict | None = None) -> None:
    payload_config = config.echo()
    if config.options.get("format", "csv") == "json":
        results = {"table": {"columns": columns, "rows": [
            [None if cell == "" else cell for cell in row] for row in rows]}}
        if summary:
            results.update(summary)
        if extra:
            results.update(extra)
        reports.write_json(config.out, {"config": payload_config, "results": results})
    else:
        reports.write_csv(config.out, columns, rows)
        reports.write_json(config.out + ".meta.json",
                           {"config": payload_config, **(extra or {})})


def _cmd_solve(config: ExperimentConfig) -> None:
    opt = config.options
    if opt.get("problem_file"):
        problem = reports.read_problem_file(opt["problem_file"])
    else:
        problem = random_spd_problem(opt["d"], opt["seed"], cond=opt["cond"])
    prior_spec = _resolve_prior(opt["prior"], problem.cols)
    policy = TerminationPolicy(residual_tol=opt["residual_tol"],
                               trace_tol=opt["trace_tol"],
                               max_iters=opt["max_iters"])
    trace = bayescg_solve(problem, prior_spec, policy, record_beliefs=True)
    rows = reports.solve_rows(trace)
    _emit(config, reports.SOLVE_COLUMNS, rows,
          summary={"status": trace.status, "iterations": trace.iterations},
          extra={"status": trace.status, "iterations": trace.iterations})


def _cmd_calibrate(config: ExperimentConfig) -> None:
    opt = config.options
    if opt.get("scenario"):
        scenarios = calibration_scenarios(opt["d"], opt["m"], opt["replications"], opt["seed"])
        if opt["scenario"] not in scenarios:
            raise UsageError(f"unknown scenario {opt['scenario']!r}; "
                             f"choose from {', '.join(sorted(scenarios))}")
        cal_config = scenarios[opt["scenario"]]
        cal_config = CalibrationConfig(
            **{**cal_config.__dict__, "direction_policy": opt["policy"],
               "problem_cond": opt["cond"]})
    else:
        cal_config = CalibrationConfig(
            d=opt["d"], m=opt["m"],
            generating_prior=_resolve_prior(opt["generating_prior"], opt["d"]),
            solver_prior=_resolve_prior(opt["prior"], opt["d"]),
            replications=opt["replications"], rng_seed=opt["seed"],
            direction_policy=opt["policy"], problem_cond=opt["cond"])
    report = run_calibration(cal_config)
    _emit(config, reports.calibration_columns(report), reports.calibration_rows(report),
          summary=reports.calibration_summary(report),
          extra={"mean_z": report.mean_z, "ks_statistic": report.ks_statistic,
                 "c_sigma0_estimate": report.c_sigma0_estimate})


def _cmd_oracle_compare(config: ExperimentConfig) -> None:
    opt = config.options
    problem = random_spd_problem(opt["d"], opt["seed"], cond=opt["cond"])
    prior_spec = _resolve_prior(opt["prior"], problem.cols)
    prior = make_prior(prior_spec, problem)
    policy = TerminationPolicy(residual_tol=1e-300, trace_tol=1e-300)
    trace = bayescg_solve(problem, prior, policy, record_beliefs=True)
    tag = WEIGHT_CHOICES[opt["weight"]]
    if tag == "all":
        weights = all_weights(problem.a, prior.covariance())
    else:
        weights = {tag: make_weight(tag, problem.a, prior.covariance())}
    rows = []
    for m in range(trace.iterations + 1):
        result = conditioning_comparison(trace, m, weights=weights)
        exact = result.distances["exact_posterior"]
        rows.append([m, "exact_posterior", "", exact.mean_diff,
                     exact.cov_frobenius_diff, exact.w2])
        for wtag in weights:
            dist = result.distances[f"mu_m[{wtag}]"]
            rows.append([m, "mu_m", wtag, dist.mean_diff, dist.cov_frobenius_diff, dist.w2])
    _emit(config, reports.ORACLE_COLUMNS, rows)


def _cmd_pinv_study(config: ExperimentConfig) -> None:
    opt = config.options
    study = PinvStudyConfig(
        rows=opt["c"], cols=opt["d"], rank=opt["rank"],
        replications=opt["replications"], rng_seed=opt["seed"],
        prior=_resolve_prior(opt["prior"], opt["d"]),
        b_in_range=not opt["b_out_of_range"])
    report = run_pinv_study(study)
    _emit(config, reports.PINV_COLUMNS, reports.pinv_rows(report),
          summary=reports.pinv_summary(report),
          extra={"aggregates": dict(sorted(report.aggregates.items()))})


def _cmd_cost_study(config: ExperimentConfig) -> None:
    opt = config.options
    report = cost_factor_study(opt["d"], trials=opt["trials"], iters=opt["iters"],
                               rng_seed=opt["seed"])
    _emit(config, reports.COST_COLUMNS, reports.cost_rows(report),
          summary=reports.cost_summary(report))


def _cmd_invariants(config: ExperimentConfig) -> None:
    opt = config.options
    rows = run_invariants(opt["d"], opt["seed"], problems=opt["problems"])
    _emit(config, reports.INVARIANT_COLUMNS, rows)


_DISPATCH = {
    "solve": _cmd_solve,
    "calibrate": _cmd_calibrate,
    "oracle-compare": _cmd_oracle_compare,
    "pinv-study": _cmd_pinv_study,
    "cost-study": _cmd_cost_study,
    "invariants": _cmd_invariants,
}


def _error_record(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}, sort_keys=True), file=sys.stderr)


def run_and_serialize(config: ExperimentConfig) -> int:
    """Dispatch one experiment and write its output atomically."""
    print(f"[bayescg-lab] {config.command} config: "
          f"{json.dumps(config.echo(), sort_keys=True)}")
    try:
        _DISPATCH[config.command](config)
    except UsageError:
        raise
    except FileNotFoundError:
        raise
    except (BreakdownError, LabError) as exc:
        _error_record(type(exc).__name__, str(exc))
        return 4
    except OSError as exc:
        _error_record("OutputError", str(exc))
        return 5
    print(f"[bayescg-lab] {config.command} -> {config.out}")
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config = parse_config(argv)
    except UsageError as exc:
        _error_record("UsageError", str(exc))
        return 2
    except FileNotFoundError as exc:
        _error_record("MissingFile", f"input file not found: {exc}")
        return 3
    try:
        return run_and_serialize(config)
    except UsageError as exc:
        _error_record("UsageError", str(exc))
        return 2
    except FileNotFoundError as exc:
        _error_record("MissingFile", f"input file not found: {exc}")
        return 3
    except (ValueError, json.JSONDecodeError) as exc:
        _error_record("InvalidInput", str(exc))
        return 3


if __name__ == "__main__":
    sys.exit(main())
