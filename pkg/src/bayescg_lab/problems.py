"""Linear systems and the seeded generators the experiments draw from."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .errors import DimensionMismatchError
from .linalg import as_matrix, as_vector, symmetry_gap


@dataclass(frozen=True)
class LinearProblem:
    """A system A x = b, optionally with the known solution attached.

    ``truth`` is experiment-only metadata: generators that build b from a
    sampled solution keep it so calibration studies can score the solver.
    """

    a: np.ndarray
    b: np.ndarray
    truth: np.ndarray | None = None

    def __post_init__(self):
        a = as_matrix(self.a, "A")
        b = as_vector(self.b, "b")
        if b.shape[0] != a.shape[0]:
            raise DimensionMismatchError(f"b has dimension {b.shape[0]}, A has {a.shape[0]} rows")
        truth = self.truth
        if truth is not None:
            truth = as_vector(truth, "truth")
            if truth.shape[0] != a.shape[1]:
                raise DimensionMismatchError(
                    f"truth has dimension {truth.shape[0]}, A has {a.shape[1]} columns"
                )
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "truth", truth)

    @property
    def rows(self) -> int:
        return self.a.shape[0]

    @property
    def cols(self) -> int:
        return self.a.shape[1]

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def is_symmetric(self, tol: float = 1e-10) -> bool:
        if not self.is_square:
            return False
        scale = max(1.0, float(np.max(np.abs(self.a))))
        return symmetry_gap(self.a) <= tol * scale

    def residual(self, x) -> np.ndarray:
        return self.b - self.a @ as_vector(x, "x")


def random_orthogonal(d: int, gen: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(gen.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def random_spd_problem(
    d: int,
    seed: int,
    *,
    cond: float = 1e2,
    stream_label: str = "problem-spd",
) -> LinearProblem:
    """Random symmetric positive definite system with controlled condition number.

    Eigenvalues are log-spaced on [1, cond] and conjugated by a Haar-ish
    orthogonal matrix; the solution is a standard normal draw and b = A x*.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    gen = _rng.stream(seed, f"{stream_label}/{d}")
    q = random_orthogonal(d, gen)
    lam = np.logspace(0.0, np.log10(cond), d) if d > 1 else np.ones(1)
    a = (q * lam) @ q.T
    a = 0.5 * (a + a.T)
    truth = gen.standard_normal(d)
    return LinearProblem(a, a @ truth, truth)


def random_nonsymmetric_problem(
    d: int,
    seed: int,
    *,
    cond: float = 50.0,
    stream_label: str = "problem-nonsym",
) -> LinearProblem:
    """Random invertible, deliberately non-symmetric system with controlled spectrum."""
    gen = _rng.stream(seed, f"{stream_label}/{d}")
    u = random_orthogonal(d, gen)
    v = random_orthogonal(d, gen)
    sig = np.logspace(0.0, np.log10(cond), d) if d > 1 else np.ones(1)
    a = (u * sig) @ v.T
    truth = gen.standard_normal(d)
    return LinearProblem(a, a @ truth, truth)


def random_rank_problem(
    rows: int,
    cols: int,
    rank: int,
    seed: int,
    *,
    b_in_range: bool = True,
    stream_label: str = "problem-rank",
) -> LinearProblem:
    """Random rank-deficient (or rectangular) system A = G1 @ G2^T of prescribed rank.

    With ``b_in_range`` the right-hand side is A applied to a Gaussian vector,
    so the system is consistent; otherwise b is a plain Gaussian draw in the
    row space's ambient space, which is almost surely outside range(A) whenever
    rank < rows.  ``truth`` is left unset: the reference solution for these
    systems is the minimum-norm least-squares solution, computed by oracle.
    """
    if not 1 <= rank <= min(rows, cols):
        raise ValueError(f"rank must lie in [1, min(rows, cols)] = [1, {min(rows, cols)}]")
    gen = _rng.stream(seed, f"{stream_label}/{rows}x{cols}r{rank}")
    g1 = gen.standard_normal((rows, rank))
    g2 = gen.standard_normal((cols, rank))
    a = g1 @ g2.T
    if b_in_range:
        b = a @ gen.standard_normal(cols)
    else:
        b = gen.standard_normal(rows)
    return LinearProblem(a, b)
