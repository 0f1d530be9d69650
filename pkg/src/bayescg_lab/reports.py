"""Deterministic serialization of experiment results.

Two formats share one rule: identical inputs produce byte-identical files.
CSV files are pure tables (header line, then one row per record) so the
plotting frontend can consume them without a parser dialect; the resolved
experiment configuration travels in the JSON payload or, for CSV outputs, in
a sidecar ``<name>.meta.json``.  Floats render with 17 significant digits,
which round-trips IEEE doubles exactly.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .calibration import CalibrationReport, CostFactorReport
from .errors import DimensionMismatchError
from .linalg import as_matrix, as_vector
from .pinv import PinvStudyReport
from .problems import LinearProblem
from .solver import SolverTrace, trace_diagnostic


def fmt(value) -> str:
    """One CSV cell: floats at 17 significant digits, ints bare, strings as-is."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if value is None:
        return ""
    text = str(value)
    if "," in text or "\n" in text or '"' in text:
        raise ValueError(f"CSV cell would need quoting: {text!r}")
    return text


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the same directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, columns: list[str], rows) -> int:
    lines = [",".join(columns)]
    count = 0
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells, header has {len(columns)}")
        lines.append(",".join(fmt(cell) for cell in row))
        count += 1
    atomic_write_text(path, "\n".join(lines) + "\n")
    return count


def read_csv(path: str) -> tuple[list[str], list[dict]]:
    with open(path, "r") as handle:
        lines = [line.rstrip("\n") for line in handle if line.strip()]
    if not lines:
        raise ValueError(f"{path} is empty")
    columns = lines[0].split(",")
    rows = [dict(zip(columns, line.split(","), strict=True)) for line in lines[1:]]
    return columns, rows


def write_json(path: str, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# problem and matrix files

def matrix_payload(m: np.ndarray) -> dict:
    m = as_matrix(m)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "storage": "row-major",
        "entries": [float(x) for x in m.ravel(order="C")],
    }


def matrix_from_payload(payload: dict) -> np.ndarray:
    rows, cols = int(payload["rows"]), int(payload["cols"])
    entries = np.asarray(payload["entries"], dtype=np.float64)
    if entries.size != rows * cols:
        raise DimensionMismatchError(
            f"matrix payload has {entries.size} entries for shape ({rows}, {cols})")
    return entries.reshape(rows, cols)


def write_problem_file(path: str, problem: LinearProblem) -> None:
    payload = {
        "kind": "linear-problem",
        "symmetric": bool(problem.is_symmetric()),
        "a": matrix_payload(problem.a),
        "b": [float(x) for x in problem.b],
        "truth": None if problem.truth is None else [float(x) for x in problem.truth],
    }
    write_json(path, payload)


def read_problem_file(path: str) -> LinearProblem:
    with open(path, "r") as handle:
        payload = json.load(handle)
    if payload.get("kind") != "linear-problem":
        raise ValueError(f"{path} is not a linear-problem file")
    a = matrix_from_payload(payload["a"])
    b = as_vector(payload["b"], "b")
    truth = payload.get("truth")
    return LinearProblem(a, b, None if truth is None else as_vector(truth, "truth"))


def write_matrix_file(path: str, m: np.ndarray) -> None:
    write_json(path, {"kind": "matrix", **matrix_payload(m)})


def read_matrix_file(path: str) -> np.ndarray:
    with open(path, "r") as handle:
        payload = json.load(handle)
    if payload.get("kind") != "matrix":
        raise ValueError(f"{path} is not a matrix file")
    return matrix_from_payload(payload)


# ---------------------------------------------------------------------------
# per-command tables

SOLVE_COLUMNS = ["iteration", "residual_norm", "cov_trace", "trace_identity",
                 "error_norm", "lambda_raw", "innovation"]


def solve_rows(trace: SolverTrace) -> list[list]:
    """Convergence table: one row per iteration, with the trace identity attached."""
    truth = trace.problem.truth
    rows = []
    for rec in trace.steps:
        identity = ""
        if rec.belief is not None:
            identity = trace_diagnostic(rec.belief, trace.prior)
        error = "" if truth is None else float(np.linalg.norm(rec.mean - truth))
        rows.append([rec.iteration, rec.residual_norm, rec.cov_trace, identity,
                     error, rec.lambda_raw, rec.innovation])
    return rows


def calibration_columns(report: CalibrationReport) -> list[str]:
    levels = [f"cover_{int(round(lv * 100))}" for lv in report.config.levels]
    return ["replication", "z", "dof", *levels]


def calibration_rows(report: CalibrationReport) -> list[list]:
    rows = []
    for i, z in enumerate(report.z_samples):
        rows.append([i, float(z), report.reference_dof,
                     *[float(v) for v in report.coverage_indicators[i]]])
    return rows


def calibration_summary(report: CalibrationReport) -> dict:
    return {
        "reference_dof": report.reference_dof,
        "mean_z": report.mean_z,
        "ks_statistic": report.ks_statistic,
        "credible_coverage": {str(k): v for k, v in report.credible_coverage.items()},
        "c_sigma0_estimate": report.c_sigma0_estimate,
        "runtime_ratio": report.runtime_ratio,
        "z_samples": [float(z) for z in report.z_samples],
    }


ORACLE_COLUMNS = ["iteration", "comparison", "weight", "mean_diff", "cov_frobenius_diff", "w2"]

PINV_COLUMNS = ["replication", "iteration", "residual_norm", "conjugate_residual_norm",
                "status", "iterations", "dist_to_pinv", "residual_final",
                "optimal_residual", "min_norm_gap", "norm_euclid",
                "norm_prior_weighted", "seminorm_a"]


def pinv_rows(report: PinvStudyReport) -> list[list]:
    rows = []
    for rep in report.replications:
        for it, (rn, cn) in enumerate(zip(rep.residual_norms, rep.conjugate_residual_norms,
                                          strict=True)):
            rows.append([rep.index, it, rn, cn, rep.status, rep.iterations,
                         rep.dist_to_pinv, rep.residual_final, rep.optimal_residual,
                         rep.min_norm_gap, rep.norm_euclid, rep.norm_prior_weighted,
                         rep.seminorm_a])
    return rows


def pinv_summary(report: PinvStudyReport) -> dict:
    return {
        "aggregates": dict(sorted(report.aggregates.items())),
        "replications": [
            {
                "index": r.index,
                "status": r.status,
                "iterations": r.iterations,
                "dist_to_pinv": r.dist_to_pinv,
                "residual_final": r.residual_final,
                "optimal_residual": r.optimal_residual,
                "min_norm_gap": r.min_norm_gap,
            }
            for r in report.replications
        ],
    }


COST_COLUMNS = ["arm", "d", "iters", "trials", "wall_bayescg", "wall_cg", "wall_ratio",
                "flops_bayescg", "flops_cg", "flop_ratio"]


def cost_rows(report: CostFactorReport) -> list[list]:
    rows = []
    for arm in (report.dense, report.sparse):
        rows.append([arm.label, report.d, report.iters, report.trials,
                     arm.wall_bayescg, arm.wall_cg, arm.wall_ratio,
                     arm.flops_bayescg, arm.flops_cg, arm.flop_ratio])
    return rows


def cost_summary(report: CostFactorReport) -> dict:
    def arm(a):
        return {
            "wall_bayescg": a.wall_bayescg,
            "wall_cg": a.wall_cg,
            "wall_ratio": a.wall_ratio,
            "flops_bayescg": a.flops_bayescg,
            "flops_cg": a.flops_cg,
            "flop_ratio": a.flop_ratio,
        }

    return {"d": report.d, "iters": report.iters, "trials": report.trials,
            "dense": arm(report.dense), "sparse_diagonal": arm(report.sparse)}


INVARIANT_COLUMNS = ["case", "iteration", "name", "value", "reference", "gap"]
