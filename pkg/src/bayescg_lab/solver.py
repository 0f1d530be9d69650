"""The Bayesian conjugate gradient iteration and its classical CG baseline.

The solver carries a Gaussian belief N(x_m, Sigma_m) about the solution of
A x = b.  Each step conditions the belief on one scalar observation s^T A x =
s^T b along a search direction s that is conjugate to all previous directions
in the A Sigma_0 A^T inner product.  The covariance factor loses exactly one
column per step (a Householder reflection removes the observed direction), so
after d steps on a full-rank problem the belief is a Dirac at the solution.

States are values: a step returns a new state and shares the immutable tail
of the direction history with its predecessor.  A single solve is sequential
by nature; separate solves share nothing and may run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    BreakdownError,
    DimensionMismatchError,
    InvalidPriorError,
    NonSymmetricError,
    NotPositiveDefiniteError,
    SingularPriorError,
)
from .gaussian import GaussianBelief
from .linalg import EPS, as_matrix, as_vector, cholesky_factor
from .problems import LinearProblem

PRIOR_KINDS = ("identity", "user_covariance", "inverse_a", "natural_precision", "sparse_diagonal")


class OpCounter:
    """Floating-point multiply counter for machine-independent cost comparisons.

    Counts the work of the iteration itself (matrix-vector products, prior
    covariance applications, dots, axpys).  Deferred covariance-factor
    materialization happens outside the counted solve loop and is charged to
    whoever asks for the factor.
    """

    def __init__(self):
        self.flops = 0

    def add(self, n: int) -> None:
        self.flops += int(n)

    def matvec(self, rows: int, cols: int) -> None:
        self.flops += int(rows) * int(cols)

    def __repr__(self) -> str:
        return f"OpCounter(flops={self.flops})"


@dataclass(frozen=True)
class PriorSpec:
    """Declarative description of a solver prior.

    kind                payload
    ----                -------
    identity            none
    user_covariance     ``covariance``: symmetric PD matrix
    inverse_a           none (uses the problem operator; requires symmetric PD A)
    natural_precision   none (precision A^T A; applying the covariance solves
                        the original problem, so the factorization happens once
                        at construction)
    sparse_diagonal     ``diagonal``: positive entries
    """

    kind: str
    covariance: np.ndarray | None = None
    diagonal: np.ndarray | None = None
    mean: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise InvalidPriorError(f"unknown prior kind {self.kind!r}; expected one of {PRIOR_KINDS}")
        if self.kind == "user_covariance" and self.covariance is None:
            raise InvalidPriorError("user_covariance prior needs a covariance payload")
        if self.kind == "sparse_diagonal" and self.diagonal is None:
            raise InvalidPriorError("sparse_diagonal prior needs a diagonal payload")

    @classmethod
    def identity(cls, mean=None) -> "PriorSpec":
        return cls("identity", mean=mean)

    @classmethod
    def user(cls, covariance, mean=None) -> "PriorSpec":
        return cls("user_covariance", covariance=covariance, mean=mean)

    @classmethod
    def inverse_a(cls, mean=None) -> "PriorSpec":
        return cls("inverse_a", mean=mean)

    @classmethod
    def natural(cls, mean=None) -> "PriorSpec":
        return cls("natural_precision", mean=mean)

    @classmethod
    def sparse_diagonal(cls, diagonal, mean=None) -> "PriorSpec":
        return cls("sparse_diagonal", diagonal=diagonal, mean=mean)


class Prior:
    """A realized prior: mean, covariance factor, and the covariance action v -> Sigma_0 v.

    Built by :func:`make_prior`.  ``apply`` accepts vectors or matrices (the
    action is columnwise); ``apply_flops`` is the multiply count of one vector
    application, used by the operation counters.
    """

    def __init__(self, kind, mean, factor, apply_fn, apply_flops, inverse_apply_fn, inverse_flops):
        self.kind = kind
        self.mean = mean
        self.factor = factor
        self._apply = apply_fn
        self.apply_flops = int(apply_flops)
        self._inverse_apply = inverse_apply_fn
        self.inverse_flops = int(inverse_flops)
        self._belief = None
        self._cov = None
        self._inv_cov = None

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self._apply(v)

    def apply_inverse(self, v: np.ndarray) -> np.ndarray:
        return self._inverse_apply(v)

    def belief(self) -> GaussianBelief:
        if self._belief is None:
            self._belief = GaussianBelief(self.mean, self.factor)
        return self._belief

    def covariance(self) -> np.ndarray:
        if self._cov is None:
            self._cov = self.factor @ self.factor.T
        return self._cov

    def inverse_covariance(self) -> np.ndarray:
        if self._inv_cov is None:
            self._inv_cov = self.apply_inverse(np.eye(self.dim))
        return self._inv_cov

    def covariance_trace(self) -> float:
        return float(np.sum(self.factor * self.factor))

    def __repr__(self) -> str:
        return f"Prior(kind={self.kind!r}, dim={self.dim})"


def make_prior(spec: PriorSpec, problem: LinearProblem) -> Prior:
    """Realize a prior spec against a problem: mean, d x r covariance factor, action.

    Raises InvalidPriorError for dimensionally or spectrally inconsistent
    payloads (non-PD covariance, inverse_a on a non-symmetric operator, ...).
    """
    d = problem.cols
    if spec.mean is not None:
        mean = as_vector(spec.mean, "prior mean")
        if mean.shape[0] != d:
            raise InvalidPriorError(f"prior mean has dimension {mean.shape[0]}, problem needs {d}")
    else:
        mean = np.zeros(d)

    if spec.kind == "identity":
        eye = np.eye(d)
        return Prior("identity", mean, eye, lambda v: np.array(v, dtype=np.float64, copy=True),
                     d, lambda v: np.array(v, dtype=np.float64, copy=True), d)

    if spec.kind == "user_covariance":
        cov = as_matrix(spec.covariance, "prior covariance")
        if cov.shape != (d, d):
            raise InvalidPriorError(f"prior covariance has shape {cov.shape}, problem needs ({d}, {d})")
        try:
            chol = cholesky_factor(cov)
        except Exception as exc:
            raise InvalidPriorError(f"prior covariance is not symmetric positive definite: {exc}") from exc
        cov = 0.5 * (cov + cov.T)
        cho = (chol, True)
        return Prior("user_covariance", mean, chol, lambda v: cov @ v, d * d,
                     lambda v: sla.cho_solve(cho, v), d * d)

    if spec.kind == "inverse_a":
        if not problem.is_square or not problem.is_symmetric():
            raise InvalidPriorError("inverse_a prior requires a symmetric operator")
        a_sym = 0.5 * (problem.a + problem.a.T)
        try:
            chol = cholesky_factor(a_sym)
        except NotPositiveDefiniteError as exc:
            raise InvalidPriorError(f"inverse_a prior requires a positive definite operator: {exc}") from exc
        factor = sla.solve_triangular(chol, np.eye(d), lower=True).T
        cho = (chol, True)
        return Prior("inverse_a", mean, factor, lambda v: sla.cho_solve(cho, v), 2 * d * d,
                     lambda v: a_sym @ v, d * d)

    if spec.kind == "natural_precision":
        a = problem.a
        precision = a.T @ a
        try:
            chol = cholesky_factor(precision)
        except NotPositiveDefiniteError as exc:
            raise InvalidPriorError(f"natural prior needs A with full column rank: {exc}") from exc
        factor = sla.solve_triangular(chol, np.eye(d), lower=True).T
        cho = (chol, True)
        return Prior("natural_precision", mean, factor, lambda v: sla.cho_solve(cho, v), 2 * d * d,
                     lambda v: precision @ v, d * d)

    if spec.kind == "sparse_diagonal":
        diag = as_vector(spec.diagonal, "prior diagonal")
        if diag.shape[0] != d:
            raise InvalidPriorError(f"prior diagonal has dimension {diag.shape[0]}, problem needs {d}")
        if np.any(diag <= 0.0):
            raise InvalidPriorError("sparse_diagonal prior needs strictly positive entries")
        factor = np.diag(np.sqrt(diag))
        inv = 1.0 / diag

        def apply_diag(v, _d=diag):
            v = np.asarray(v, dtype=np.float64)
            return v * _d if v.ndim == 1 else v * _d[:, None]

        def apply_inv_diag(v, _i=inv):
            v = np.asarray(v, dtype=np.float64)
            return v * _i if v.ndim == 1 else v * _i[:, None]

        return Prior("sparse_diagonal", mean, factor, apply_diag, d, apply_inv_diag, d)

    raise InvalidPriorError(f"unknown prior kind {spec.kind!r}")


@dataclass(frozen=True)
class TerminationPolicy:
    """Deterministic stopping rules: relative residual, relative covariance trace, step cap.

    Both tolerance criteria are deterministic functions of the iteration
    history; the trace criterion is the probabilistic one in interpretation
    only (it reads the belief's remaining spread).
    """

    residual_tol: float = 1e-10
    trace_tol: float = 1e-12
    max_iters: int | None = None

    def __post_init__(self):
        if self.residual_tol <= 0.0 or self.trace_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class SolverState:
    """Value snapshot of the iteration after m steps.

    ``directions`` are the accepted search directions (unit A Sigma_0 A^T norm
    when the solver normalizes, which is the default), ``observed_directions``
    their images A^T s_j, and ``gains`` the update vectors Sigma_0 A^T s_j.
    ``conjugacy_scalars`` holds s_j^T A Sigma_0 A^T s_j for the stored
    directions.  ``factor`` is the maintained covariance factor, or None when
    the solve deferred materialization.
    """

    iteration: int
    mean: np.ndarray
    residual: np.ndarray
    directions: tuple
    observed_directions: tuple
    gains: tuple
    conjugacy_scalars: tuple
    factor: np.ndarray | None
    cov_trace: float

    @property
    def krylov_basis(self) -> tuple:
        return self.directions

    def belief(self, prior: Prior | None = None) -> GaussianBelief:
        """Current belief; needs the prior when the factor was deferred."""
        rank = None
        if prior is not None:
            rank = prior.factor.shape[1] - self.iteration
        if self.factor is not None:
            return GaussianBelief(self.mean, self.factor, rank_hint=rank)
        if prior is None:
            raise ValueError("factor was deferred; pass the prior to materialize the belief")
        vs = self.observed_directions

        def build(f0=prior.factor, vs=vs):
            f = f0.copy()
            for v in vs:
                f = _householder_drop(f, f.T @ v)
            return f

        return GaussianBelief(self.mean, None, factor_fn=build, rank_hint=rank)


def initial_state(problem: LinearProblem, prior: Prior, *, maintain_factor: bool = True) -> SolverState:
    """State at m = 0: prior belief, residual b - A x_0."""
    x = prior.mean.copy()
    r = problem.b - problem.a @ x
    factor = prior.factor.copy() if maintain_factor else None
    return SolverState(0, x, r, (), (), (), (),
                       factor, prior.covariance_trace())


def _householder_drop(factor: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Remove the direction w (in factor coordinates) from a d x r factor.

    Returns F' with one fewer column and F' F'^T = F (I - ww^T/||w||^2) F^T,
    i.e. the exact rank-one conditioning downdate of the covariance.
    """
    norm_w = float(np.linalg.norm(w))
    if norm_w == 0.0:
        raise BreakdownError("covariance factor is already null in the observed direction")
    u = w.copy()
    u[0] += math.copysign(norm_w, w[0]) if w[0] != 0.0 else norm_w
    beta = 2.0 / float(u @ u)
    reflected = factor - np.outer(factor @ u, beta * u)
    return reflected[:, 1:]


def _estimate_conjugate_norm_scale(problem: LinearProblem, prior: Prior,
                                   counter: OpCounter | None, iters: int = 8) -> float:
    """Power-iteration estimate of ||A Sigma_0 A^T||_2, the conjugate-norm scale."""
    a = problem.a
    c = problem.rows
    v = np.full(c, 1.0 / math.sqrt(c))
    lam = 0.0
    for _ in range(iters):
        w = a @ prior.apply(a.T @ v)
        if counter is not None:
            counter.matvec(problem.cols, c)
            counter.add(prior.apply_flops)
            counter.matvec(c, problem.cols)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam


def _advance(a, b, prior, x, r, s_buf, v_buf, u_buf, lam_buf, m, seed, *,
             reorthogonalize, normalize, breakdown_tol, factor, counter):
    """One BayesCG step: conjugate the seed, condition the belief on it.

    Writes the accepted direction into column m of the buffers and returns
    (x', r', lam_raw, nu, factor', cov_trace_decrement).  Raises
    BreakdownError when the conjugated seed has numerically zero
    A Sigma_0 A^T norm.
    """
    c_dim, d_dim = a.shape
    shat = np.array(seed, dtype=np.float64, copy=True)
    if shat.shape[0] != c_dim:
        raise DimensionMismatchError(f"direction seed has dimension {shat.shape[0]}, expected {c_dim}")
    h = a.T @ shat
    if counter is not None:
        counter.matvec(d_dim, c_dim)
    if m > 0:
        if reorthogonalize:
            cols = slice(0, m)
        else:
            cols = slice(m - 1, m)
        k = cols.stop - cols.start
        coef = (u_buf[:, cols].T @ h) / lam_buf[cols]
        shat -= s_buf[:, cols] @ coef
        h -= v_buf[:, cols] @ coef
        if counter is not None:
            counter.add(k * (2 * d_dim + c_dim))

    u = prior.apply(h)
    lam_raw = float(h @ u)
    if counter is not None:
        counter.add(prior.apply_flops + d_dim)
    seed_scale = float(shat @ shat)
    if lam_raw <= breakdown_tol * seed_scale or lam_raw <= 0.0 or seed_scale == 0.0:
        raise BreakdownError(
            f"search direction has conjugate norm {lam_raw:.3e} <= "
            f"{breakdown_tol:.3e} * ||s||^2 at iteration {m + 1}"
        )

    if normalize:
        scale = 1.0 / math.sqrt(lam_raw)
        s = shat * scale
        v = h * scale
        u = u * scale
        lam = 1.0
    else:
        s, v = shat, h
        lam = lam_raw

    nu = float(s @ r)
    x = x + (nu / lam) * u
    r = b - a @ x
    if counter is not None:
        counter.add(c_dim + 2 * d_dim)
        counter.matvec(c_dim, d_dim)

    trace_dec = float(u @ u) / lam
    if factor is not None:
        w = factor.T @ v
        factor = _householder_drop(factor, w)
        if counter is not None:
            counter.add(3 * factor.shape[0] * (factor.shape[1] + 1))

    s_buf[:, m] = s
    v_buf[:, m] = v
    u_buf[:, m] = u
    lam_buf[m] = lam
    return x, r, lam_raw, nu, factor, trace_dec


def bayescg_step(state: SolverState, problem: LinearProblem, prior: Prior, *,
                 reorthogonalize: bool = True, normalize_directions: bool = True,
                 direction_seed: np.ndarray | None = None,
                 breakdown_tol: float | None = None,
                 counter: OpCounter | None = None) -> SolverState:
    """Advance the belief by one conditioning step; returns a new state.

    The default seed is the current residual.  Raises BreakdownError (with the
    incoming state attached) when the candidate direction is conjugate-null,
    which for rank-deficient operators is the informative stopping event.
    """
    m = state.iteration
    a, b = problem.a, problem.b
    if breakdown_tol is None:
        breakdown_tol = problem.cols * EPS * _estimate_conjugate_norm_scale(problem, prior, None)
    s_buf = np.empty((problem.rows, m + 1))
    v_buf = np.empty((problem.cols, m + 1))
    u_buf = np.empty((problem.cols, m + 1))
    lam_buf = np.empty(m + 1)
    for j in range(m):
        s_buf[:, j] = state.directions[j]
        v_buf[:, j] = state.observed_directions[j]
        u_buf[:, j] = state.gains[j]
        lam_buf[j] = state.conjugacy_scalars[j]
    seed = state.residual if direction_seed is None else direction_seed
    try:
        x, r, lam_raw, nu, factor, trace_dec = _advance(
            a, b, prior, state.mean, state.residual, s_buf, v_buf, u_buf, lam_buf, m, seed,
            reorthogonalize=reorthogonalize, normalize=normalize_directions,
            breakdown_tol=breakdown_tol,
            factor=None if state.factor is None else state.factor,
            counter=counter)
    except BreakdownError as exc:
        exc.state = state
        raise
    return SolverState(
        m + 1, x, r,
        state.directions + (s_buf[:, m].copy(),),
        state.observed_directions + (v_buf[:, m].copy(),),
        state.gains + (u_buf[:, m].copy(),),
        state.conjugacy_scalars + (lam_buf[m],),
        factor, max(state.cov_trace - trace_dec, 0.0))


@dataclass
class StepRecord:
    """Per-iteration diagnostics; ``belief`` is populated when the solve records beliefs."""

    iteration: int
    mean: np.ndarray
    residual_norm: float
    lambda_raw: float | None
    innovation: float | None
    cov_trace: float
    belief: GaussianBelief | None = None
    direction: np.ndarray | None = None


@dataclass
class SolverTrace:
    """Everything a solve produced: per-step records, final state, stop reason."""

    status: str
    steps: list[StepRecord]
    final_state: SolverState
    problem: LinearProblem
    prior: Prior
    policy: TerminationPolicy
    counter: OpCounter | None = None

    @property
    def iterations(self) -> int:
        return self.final_state.iteration

    @property
    def means(self) -> list[np.ndarray]:
        return [rec.mean for rec in self.steps]

    @property
    def residual_norms(self) -> list[float]:
        return [rec.residual_norm for rec in self.steps]

    @property
    def cov_traces(self) -> list[float]:
        return [rec.cov_trace for rec in self.steps]

    def final_belief(self) -> GaussianBelief:
        return self.final_state.belief(self.prior)

    def belief_at(self, m: int) -> GaussianBelief:
        rec = self.steps[m]
        if rec.belief is None:
            raise ValueError("solve ran with record_beliefs=False; only the final belief is available")
        return rec.belief

    def observations(self, m: int | None = None):
        """The (directions, values) pairs the solver conditioned on, up to step m."""
        m = self.iterations if m is None else m
        dirs = self.final_state.directions[:m]
        values = [float(s @ self.problem.b) for s in dirs]
        return list(dirs), values


def _solve_core(problem: LinearProblem, prior: Prior, policy: TerminationPolicy, *,
                reorthogonalize: bool = True, normalize_directions: bool = True,
                record_beliefs: bool = True, maintain_factor: bool | None = None,
                direction_seeds=None, counter: OpCounter | None = None) -> SolverTrace:
    """Shape-agnostic solve loop shared by bayescg_solve and the rank-deficient studies."""
    a, b = problem.a, problem.b
    c_dim, d_dim = a.shape
    limit = min(c_dim, d_dim)
    max_iters = limit if policy.max_iters is None else min(policy.max_iters, limit)
    if direction_seeds is not None:
        direction_seeds = [as_vector(s, "direction seed") for s in direction_seeds]
        max_iters = min(max_iters, len(direction_seeds))
    if maintain_factor is None:
        maintain_factor = record_beliefs

    x = prior.mean.copy()
    r = b - a @ x
    if counter is not None:
        counter.matvec(c_dim, d_dim)
    b_norm = float(np.linalg.norm(b)) or 1.0
    trace0 = prior.covariance_trace()
    cov_trace = trace0
    factor = prior.factor.copy() if maintain_factor else None
    breakdown_tol = d_dim * EPS * _estimate_conjugate_norm_scale(problem, prior, counter)

    s_buf = np.empty((c_dim, max_iters))
    v_buf = np.empty((d_dim, max_iters))
    u_buf = np.empty((d_dim, max_iters))
    lam_buf = np.empty(max_iters)

    def snapshot(m):
        return GaussianBelief(x.copy(), factor.copy(),
                              rank_hint=prior.factor.shape[1] - m) if record_beliefs else None

    steps = [StepRecord(0, x.copy(), float(np.linalg.norm(r)), None, None, cov_trace,
                        snapshot(0))]
    status = None
    m = 0
    while True:
        if float(np.linalg.norm(r)) <= policy.residual_tol * b_norm:
            status = "residual_converged"
            break
        if cov_trace <= policy.trace_tol * trace0:
            status = "trace_converged"
            break
        if m >= max_iters:
            status = "max_iterations"
            break
        seed = r if direction_seeds is None else direction_seeds[m]
        try:
            x, r, lam_raw, nu, factor, trace_dec = _advance(
                a, b, prior, x, r, s_buf, v_buf, u_buf, lam_buf, m, seed,
                reorthogonalize=reorthogonalize, normalize=normalize_directions,
                breakdown_tol=breakdown_tol, factor=factor, counter=counter)
        except BreakdownError as exc:
            status = "breakdown"
            trace = _finish_trace(status, steps, problem, prior, policy, counter,
                                  m, x, r, s_buf, v_buf, u_buf, lam_buf, factor, cov_trace)
            exc.trace = trace
            exc.state = trace.final_state
            raise
        cov_trace = max(cov_trace - trace_dec, 0.0)
        steps.append(StepRecord(m + 1, x.copy(), float(np.linalg.norm(r)), lam_raw, nu,
                                cov_trace, snapshot(m + 1), s_buf[:, m].copy()))
        m += 1
    return _finish_trace(status, steps, problem, prior, policy, counter,
                         m, x, r, s_buf, v_buf, u_buf, lam_buf, factor, cov_trace)


def _finish_trace(status, steps, problem, prior, policy, counter,
                  m, x, r, s_buf, v_buf, u_buf, lam_buf, factor, cov_trace) -> SolverTrace:
    state = SolverState(
        m, x.copy(), r.copy(),
        tuple(s_buf[:, j].copy() for j in range(m)),
        tuple(v_buf[:, j].copy() for j in range(m)),
        tuple(u_buf[:, j].copy() for j in range(m)),
        tuple(float(lam_buf[j]) for j in range(m)),
        None if factor is None else factor.copy(), cov_trace)
    return SolverTrace(status, steps, state, problem, prior, policy, counter)


def bayescg_solve(problem: LinearProblem, prior: PriorSpec | Prior,
                  policy: TerminationPolicy | None = None, *,
                  reorthogonalize: bool = True, normalize_directions: bool = True,
                  record_beliefs: bool = True, maintain_factor: bool | None = None,
                  direction_seeds=None, counter: OpCounter | None = None) -> SolverTrace:
    """Run BayesCG on a square system until a termination criterion fires.

    Directions are residual-seeded and, by default, re-conjugated against the
    full history so that exact-arithmetic identities (conjugacy, posterior
    rank, trace) remain visible at double precision; pass
    ``reorthogonalize=False`` for the classical two-term recurrence.
    ``direction_seeds`` replaces the residual seeds with caller-supplied ones
    (the calibration harness uses solution-independent seeds).

    On conjugate-norm breakdown the partial trace is attached to the raised
    BreakdownError rather than discarded.
    """
    if not problem.is_square:
        raise DimensionMismatchError(
            f"bayescg_solve needs a square operator, got {problem.rows} x {problem.cols}; "
            "rank-deficient and rectangular studies go through the pinv module")
    if isinstance(prior, PriorSpec):
        prior = make_prior(prior, problem)
    if policy is None:
        policy = TerminationPolicy()
    return _solve_core(problem, prior, policy,
                       reorthogonalize=reorthogonalize,
                       normalize_directions=normalize_directions,
                       record_beliefs=record_beliefs, maintain_factor=maintain_factor,
                       direction_seeds=direction_seeds, counter=counter)


def classical_cg_solve(problem: LinearProblem, x0: np.ndarray | None = None,
                       tol: float = 1e-10, max_iters: int | None = None,
                       counter: OpCounter | None = None) -> list[np.ndarray]:
    """Standard conjugate gradients on a symmetric PD system; returns all iterates.

    The per-step iterate list is what the coincidence experiments compare
    against.  ``tol`` is relative to ||b||; tol = 0 forces exactly
    ``max_iters`` steps, which the cost studies use for iteration-matched
    timing.
    """
    if not problem.is_square or not problem.is_symmetric():
        raise NonSymmetricError("classical CG requires a symmetric operator")
    a, b = problem.a, problem.b
    d = problem.cols
    x = np.zeros(d) if x0 is None else as_vector(x0, "x0").copy()
    if max_iters is None:
        max_iters = d
    r = b - a @ x
    if counter is not None:
        counter.matvec(d, d)
    b_norm = float(np.linalg.norm(b)) or 1.0
    p = r.copy()
    rs = float(r @ r)
    iterates = [x.copy()]
    for _ in range(max_iters):
        if math.sqrt(rs) <= tol * b_norm:
            break
        ap = a @ p
        pap = float(p @ ap)
        if counter is not None:
            counter.matvec(d, d)
            counter.add(5 * d)
        if pap <= 0.0:
            raise NotPositiveDefiniteError(
                f"p^T A p = {pap:.3e} <= 0; operator is not positive definite")
        alpha = rs / pap
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
        iterates.append(x.copy())
    return iterates


def trace_diagnostic(state, prior) -> float:
    """trace(Sigma_m Sigma_0^{-1}); equals d - m in exact arithmetic at step m.

    ``state`` may be a SolverState, a GaussianBelief, or anything with a
    ``covariance_factor``.  ``prior`` is a Prior (whose inverse action is
    used directly) or a GaussianBelief whose covariance must be invertible.
    """
    if isinstance(state, SolverState):
        if state.factor is None:
            raise ValueError("state factor was deferred; materialize the belief first")
        f = state.factor
    else:
        f = state.covariance_factor
    if isinstance(prior, Prior):
        return float(np.sum(f * prior.apply_inverse(f)))
    cov = prior.covariance()
    try:
        cho = sla.cho_factor(cov)
    except np.linalg.LinAlgError as exc:
        raise SingularPriorError(f"prior covariance is singular: {exc}") from exc
    except sla.LinAlgError as exc:
        raise SingularPriorError(f"prior covariance is singular: {exc}") from exc
    return float(np.sum(f * sla.cho_solve(cho, f)))


def max_offdiagonal_conjugacy(state: SolverState, problem: LinearProblem, prior: Prior) -> float:
    """Largest |s_i^T A Sigma_0 A^T s_j| / sqrt(lam_i lam_j) over i != j; conjugacy health check."""
    m = state.iteration
    if m < 2:
        return 0.0
    s = np.stack(state.directions, axis=1)
    v = problem.a.T @ s
    gram = v.T @ prior.apply(v)
    lam = np.sqrt(np.asarray(state.conjugacy_scalars))
    gram = gram / np.outer(lam, lam)
    off = gram - np.diag(np.diag(gram))
    return float(np.max(np.abs(off)))
