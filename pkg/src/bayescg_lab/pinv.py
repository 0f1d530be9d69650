"""Singular and rectangular systems: run the belief recursion to breakdown and
measure where it lands relative to the minimum-norm least-squares solution.

No normal equations are formed anywhere: the recursion observes s^T A x with
directions s living in the range space, exactly as in the square case, and
conjugate-norm breakdown is the natural stopping event once the informative
directions are exhausted.  Whether the final mean equals the pseudo-inverse
solution is recorded, not asserted; it is the experiment's finding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import parallel
from .errors import BreakdownError
from .linalg import as_matrix, as_vector, pseudo_inverse
from .problems import random_rank_problem
from .solver import PriorSpec, TerminationPolicy, _solve_core, make_prior


def moore_penrose_solve(a, b) -> np.ndarray:
    """Minimum-norm least-squares solution A^+ b.

    Among all x minimizing ||A x - b|| this is the one of least Euclidean
    norm; for invertible A it is the exact solution.
    """
    a = as_matrix(a, "A")
    b = as_vector(b, "b")
    return pseudo_inverse(a) @ b


@dataclass(frozen=True)
class PinvStudyConfig:
    """Shape, rank, and replication plan for the rank-deficient study."""

    rows: int
    cols: int
    rank: int
    replications: int
    rng_seed: int
    prior: PriorSpec = field(default_factory=PriorSpec.identity)
    b_in_range: bool = True
    residual_tol: float = 1e-12

    def __post_init__(self):
        if not 1 <= self.rank <= min(self.rows, self.cols):
            raise ValueError("rank must lie in [1, min(rows, cols)]")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


@dataclass
class PinvReplication:
    """One random system: how far the run got and where it stopped."""

    index: int
    status: str
    iterations: int
    dist_to_pinv: float
    residual_final: float
    optimal_residual: float
    min_norm_gap: float
    norm_euclid: float
    norm_prior_weighted: float
    seminorm_a: float
    residual_norms: list[float]
    conjugate_residual_norms: list[float]


@dataclass
class PinvStudyReport:
    config: PinvStudyConfig
    replications: list[PinvReplication]
    aggregates: dict[str, float]


def _quantile(values: np.ndarray, q: float) -> float:
    return float(np.quantile(values, q))


def _run_one(config: PinvStudyConfig, index: int) -> PinvReplication:
    problem = random_rank_problem(
        config.rows, config.cols, config.rank, config.rng_seed,
        b_in_range=config.b_in_range, stream_label=f"pinv-study/{index}")
    prior = make_prior(config.prior, problem)
    policy = TerminationPolicy(residual_tol=config.residual_tol, trace_tol=1e-300,
                               max_iters=min(config.rows, config.cols))
    try:
        trace = _solve_core(problem, prior, policy, record_beliefs=False)
        status = trace.status
    except BreakdownError as exc:
        trace = exc.trace
        status = "breakdown"

    a, b = problem.a, problem.b
    x = trace.final_state.mean
    pinv_x = moore_penrose_solve(a, b)
    optimal_residual = float(np.linalg.norm(a @ pinv_x - b))

    # Conjugate-metric residual seminorm sqrt(r^T K^+ r), K = A Sigma0 A^T: the
    # quantity the conditioning recursion provably drives down monotonically.
    k = a @ prior.apply(a.T)
    k_pinv = pseudo_inverse(0.5 * (k + k.T))
    conj_norms = []
    for rec in trace.steps:
        r = b - a @ rec.mean
        conj_norms.append(float(np.sqrt(max(r @ (k_pinv @ r), 0.0))))

    prior_weighted = float(np.sqrt(max(x @ prior.apply_inverse(x), 0.0)))
    return PinvReplication(
        index=index,
        status=status,
        iterations=trace.iterations,
        dist_to_pinv=float(np.linalg.norm(x - pinv_x)),
        residual_final=float(np.linalg.norm(a @ x - b)),
        optimal_residual=optimal_residual,
        min_norm_gap=float(np.linalg.norm(x) - np.linalg.norm(pinv_x)),
        norm_euclid=float(np.linalg.norm(x)),
        norm_prior_weighted=prior_weighted,
        seminorm_a=float(np.linalg.norm(a @ x)),
        residual_norms=[rec.residual_norm for rec in trace.steps],
        conjugate_residual_norms=conj_norms,
    )


def run_pinv_study(config: PinvStudyConfig) -> PinvStudyReport:
    """Replicate random systems of the prescribed rank and tabulate the endpoints.

    Breakdown is data here, never a failure; each replication records its
    stopping status, iteration count, and distances to the oracle solution.
    """
    reps = parallel.map_indexed(lambda i: _run_one(config, i), config.replications)
    dist = np.array([r.dist_to_pinv for r in reps])
    iters = np.array([r.iterations for r in reps], dtype=float)
    resid = np.array([r.residual_final for r in reps])
    gap = np.array([r.min_norm_gap for r in reps])
    aggregates = {
        "dist_to_pinv_mean": float(dist.mean()),
        "dist_to_pinv_q10": _quantile(dist, 0.10),
        "dist_to_pinv_q50": _quantile(dist, 0.50),
        "dist_to_pinv_q90": _quantile(dist, 0.90),
        "iterations_mean": float(iters.mean()),
        "iterations_max": float(iters.max()),
        "min_norm_gap_mean": float(gap.mean()),
        "residual_final_mean": float(resid.mean()),
        "residual_final_q50": _quantile(resid, 0.50),
    }
    return PinvStudyReport(config, reps, aggregates)
