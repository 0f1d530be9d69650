"""Structural invariants of the recursion, evaluated on a seeded corpus.

One full-depth solve per (problem, prior kind) pair; every row is one checked
identity at one iteration: the trace identity trace(Sigma_m Sigma_0^{-1}) =
d - m, the rank companion rank(Sigma_m) = d - m, agreement with exact
conditioning, and the conjugacy health of the accepted directions.
"""

from __future__ import annotations

import numpy as np

from .linalg import numerical_rank
from .oracle import LinearObservations, compare_beliefs, exact_condition
from .problems import random_spd_problem
from .solver import (
    PriorSpec,
    TerminationPolicy,
    bayescg_solve,
    make_prior,
    max_offdiagonal_conjugacy,
    trace_diagnostic,
)

DEFAULT_PRIOR_KINDS = ("identity", "user_covariance", "sparse_diagonal")


def _prior_spec(kind: str, d: int, gen: np.random.Generator) -> PriorSpec:
    if kind == "identity":
        return PriorSpec.identity()
    if kind == "user_covariance":
        g = gen.standard_normal((d, d))
        return PriorSpec.user(g @ g.T / d + np.eye(d))
    if kind == "sparse_diagonal":
        return PriorSpec.sparse_diagonal(gen.uniform(0.5, 2.0, size=d))
    if kind == "inverse_a":
        return PriorSpec.inverse_a()
    if kind == "natural_precision":
        return PriorSpec.natural()
    raise ValueError(f"unknown prior kind {kind!r}")


def run_invariants(d: int, seed: int, *, prior_kinds=DEFAULT_PRIOR_KINDS,
                   problems: int = 1) -> list[list]:
    """Rows [case, iteration, name, value, reference, gap] for the invariant table."""
    from . import rng as _rng

    rows: list[list] = []
    policy = TerminationPolicy(residual_tol=1e-300, trace_tol=1e-300)
    for p in range(problems):
        problem = random_spd_problem(d, seed, stream_label=f"invariants/{p}")
        for kind in prior_kinds:
            gen = _rng.stream(seed, f"invariants-prior/{p}/{kind}")
            prior = make_prior(_prior_spec(kind, d, gen), problem)
            trace = bayescg_solve(problem, prior, policy, record_beliefs=True)
            case = f"p{p}-{kind}"
            prior_belief = prior.belief()
            for rec in trace.steps:
                m = rec.iteration
                belief = rec.belief
                value = trace_diagnostic(belief, prior)
                rows.append([case, m, "trace_identity", value, float(d - m),
                             abs(value - (d - m))])
                rank = numerical_rank(belief.covariance())
                rows.append([case, m, "rank", float(rank), float(d - m),
                             abs(float(rank - (d - m)))])
                if m > 0:
                    obs = LinearObservations.from_trace(trace, m)
                    dist = compare_beliefs(belief, exact_condition(prior_belief, obs))
                    rows.append([case, m, "oracle_mean_gap", dist.mean_diff, 0.0,
                                 dist.mean_diff])
                    rows.append([case, m, "oracle_cov_gap", dist.cov_frobenius_diff, 0.0,
                                 dist.cov_frobenius_diff])
            conj = max_offdiagonal_conjugacy(trace.final_state, problem, prior)
            rows.append([case, trace.iterations, "conjugacy_offdiag", conj, 0.0, conj])
    return rows
