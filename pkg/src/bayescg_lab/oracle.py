"""Ground-truth Gaussian machinery: exact conditioning, projected reference measures,
and quantitative comparisons against solver beliefs.

The central identity checked throughout the test suite: the solver's belief
after m steps equals exact conditioning of the prior on the solver's own m
observations, so these oracles and the recursion validate each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateObservationsError, DimensionMismatchError
from .gaussian import GaussianBelief, InnerProductWeight, all_weights, gaussian_w2_distance
from .linalg import EPS, as_matrix, as_vector, psd_factor, weighted_projection
from .solver import SolverTrace


@dataclass(frozen=True)
class LinearObservations:
    """Noise-free scalar observations s_i^T A x = y_i along given directions."""

    directions: tuple
    values: tuple
    operator: np.ndarray

    def __post_init__(self):
        op = as_matrix(self.operator, "operator")
        dirs = tuple(as_vector(s, "direction") for s in self.directions)
        vals = tuple(float(y) for y in self.values)
        if len(dirs) != len(vals):
            raise DimensionMismatchError(
                f"{len(dirs)} directions but {len(vals)} observed values")
        for s in dirs:
            if s.shape[0] != op.shape[0]:
                raise DimensionMismatchError(
                    f"direction has dimension {s.shape[0]}, operator has {op.shape[0]} rows")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "operator", op)

    @classmethod
    def from_trace(cls, trace: SolverTrace, m: int | None = None) -> "LinearObservations":
        dirs, values = trace.observations(m)
        return cls(tuple(dirs), tuple(values), trace.problem.a)

    def __len__(self) -> int:
        return len(self.directions)


def exact_condition(prior: GaussianBelief, obs: LinearObservations) -> GaussianBelief:
    """Condition a Gaussian prior on exact linear observations.

    Posterior mean x_0 + Sigma_0 A^T S G^{-1} (y - S^T A x_0) and covariance
    Sigma_0 - Sigma_0 A^T S G^{-1} S^T A Sigma_0 with G = S^T A Sigma_0 A^T S,
    computed entirely in factored form: with Sigma_0 = F F^T and T = F^T A^T S,
    the posterior factor is F (I - Q Q^T) for an orthonormal basis Q of
    range(T), which is PSD by construction.

    Raises DegenerateObservationsError when G is numerically singular.
    """
    if len(obs) == 0:
        return prior
    f0 = prior.covariance_factor
    x0 = prior.mean
    a = obs.operator
    if a.shape[1] != prior.dim:
        raise DimensionMismatchError(
            f"operator has {a.shape[1]} columns, prior dimension is {prior.dim}")
    s = np.stack(obs.directions, axis=1)
    y = np.asarray(obs.values)
    t = f0.T @ (a.T @ s)
    gram = t.T @ t
    gram = 0.5 * (gram + gram.T)
    rhs = y - s.T @ (a @ x0)
    m = gram.shape[0]
    try:
        cho = sla.cho_factor(gram)
        coeff = sla.cho_solve(cho, rhs)
    except (np.linalg.LinAlgError, sla.LinAlgError):
        # Symmetric-pivoting fallback; reject if the Gram matrix is rank deficient.
        lam, vec = np.linalg.eigh(gram)
        if lam[-1] <= 0.0 or lam[0] <= m * EPS * lam[-1]:
            raise DegenerateObservationsError(
                f"observation Gram matrix numerically singular "
                f"(eigenvalues {lam[0]:.3e} .. {lam[-1]:.3e})") from None
        coeff = vec @ ((vec.T @ rhs) / lam)
    mean = x0 + f0 @ (t @ coeff)
    q = np.linalg.qr(t)[0]
    factor = f0 - (f0 @ q) @ q.T
    return GaussianBelief(mean, factor, rank_hint=max(f0.shape[1] - m, 0))


def build_mu_m(prior: GaussianBelief, truth: np.ndarray, krylov_basis,
               weight: InnerProductWeight) -> GaussianBelief:
    """Projected reference measure: Dirac at the truth on span(basis), prior elsewhere.

    Mean P x* + (I - P) x_0 and covariance (I - P) Sigma_0 (I - P)^T, with P
    the weighted projection onto the basis span.  An empty basis returns the
    prior itself and a full basis the Dirac at the truth; both identities are
    exact in exact arithmetic, so the endpoints are returned verbatim.
    """
    truth = as_vector(truth, "truth")
    if truth.shape[0] != prior.dim:
        raise DimensionMismatchError(
            f"truth has dimension {truth.shape[0]}, prior has {prior.dim}")
    basis = [as_vector(v, "basis vector") for v in krylov_basis]
    m = len(basis)
    if m == 0:
        return prior
    if m == prior.dim:
        # Full span: the projection is the identity, so mu_d is a Dirac on the truth.
        weighted_projection(basis, weight)  # still validates independence
        return GaussianBelief.dirac(truth)
    proj = weighted_projection(basis, weight)
    comp = np.eye(prior.dim) - proj
    mean = proj @ truth + comp @ prior.mean
    cov = comp @ prior.covariance() @ comp.T
    factor = psd_factor(0.5 * (cov + cov.T))
    return GaussianBelief(mean, factor, rank_hint=prior.dim - m)


@dataclass(frozen=True)
class BeliefDistance:
    """Mean gap, covariance Frobenius gap, and 2-Wasserstein distance between beliefs."""

    mean_diff: float
    cov_frobenius_diff: float
    w2: float

    def max_gap(self) -> float:
        return max(self.mean_diff, self.cov_frobenius_diff, self.w2)


def compare_beliefs(a: GaussianBelief, b: GaussianBelief) -> BeliefDistance:
    """All three distances between two beliefs of equal dimension."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"beliefs have dimensions {a.dim} and {b.dim}")
    mean_diff = float(np.linalg.norm(a.mean - b.mean))
    cov_diff = float(np.linalg.norm(a.covariance() - b.covariance(), "fro"))
    return BeliefDistance(mean_diff, cov_diff, gaussian_w2_distance(a, b))


@dataclass
class ConditioningResult:
    """Solver belief vs exact conditioning vs the projected measures, at one step."""

    iteration: int
    solver_belief: GaussianBelief
    exact_posterior: GaussianBelief
    mu_m: dict = field(default_factory=dict)
    distances: dict = field(default_factory=dict)


def conditioning_comparison(trace: SolverTrace, m: int, *,
                            weights: dict[str, InnerProductWeight] | None = None) -> ConditioningResult:
    """Compare the solver's step-m belief with the exact posterior and each mu_m.

    Needs the problem's true solution (the reference measures are defined
    through it) and a belief-recording trace.  Which weighted mu_m, if any,
    the solver output matches is reported, never assumed.
    """
    problem = trace.problem
    if problem.truth is None:
        raise ValueError("conditioning comparison needs a problem with known truth")
    belief = trace.belief_at(m)
    prior_belief = trace.prior.belief()
    exact = exact_condition(prior_belief, LinearObservations.from_trace(trace, m))
    if weights is None:
        weights = all_weights(problem.a, trace.prior.covariance())
    result = ConditioningResult(m, belief, exact)
    result.distances["exact_posterior"] = compare_beliefs(belief, exact)
    basis = list(trace.final_state.directions[:m])
    for tag, weight in weights.items():
        mu = build_mu_m(prior_belief, problem.truth, basis, weight)
        result.mu_m[tag] = mu
        result.distances[f"mu_m[{tag}]"] = compare_beliefs(belief, mu)
    return result


def posterior_nullspace_basis(belief: GaussianBelief) -> np.ndarray:
    """Orthonormal basis of ker(Sigma) from the SVD of the covariance factor."""
    f = belief.covariance_factor
    d = f.shape[0]
    if f.shape[1] == 0:
        return np.eye(d)
    u, sing, _ = np.linalg.svd(f, full_matrices=True)
    cutoff = max(f.shape) * EPS * (sing[0] if sing.size else 0.0)
    rank = int(np.count_nonzero(sing > cutoff))
    return u[:, rank:]


def nullspace_candidate_angles(trace: SolverTrace, m: int, *,
                               weights: dict[str, InnerProductWeight] | None = None) -> list[dict]:
    """Principal angles between ker(Sigma_m) and weighted images of candidate spaces.

    For each weight W and base space B in {span(S_m), span(Sigma_0 A^T S_m)}
    the candidate is W B, the subspace whose W-orthogonal complement is B.  An
    angle of zero therefore means the posterior column space is exactly the
    W-orthogonal complement of the base.  Which pair (if any) wins is an
    experimental finding, so this returns the full table.
    """
    if m < 1:
        raise ValueError("need at least one step")
    belief = trace.belief_at(m)
    kernel = posterior_nullspace_basis(belief)
    prior = trace.prior
    problem = trace.problem
    if weights is None:
        weights = all_weights(problem.a, prior.covariance())
    s = np.stack(trace.final_state.directions[:m], axis=1)
    bases = {
        "krylov": s,
        "sigma0_at_s": prior.apply(problem.a.T @ s),
    }
    rows = []
    for tag, weight in weights.items():
        for base_name, base in bases.items():
            candidate = weight.matrix @ base
            angle = float(np.max(sla.subspace_angles(kernel, candidate))) if kernel.size else 0.0
            rows.append({"weight": tag, "base": base_name, "max_angle": angle,
                         "iteration": m})
    return rows
