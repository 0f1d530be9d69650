"""Dense numerical kernels: PSD square roots, pseudo-inverses, rank, weighted projections.

Everything here is a pure function of ndarray inputs.  Covariances elsewhere in
the package are carried in factored form; these kernels are where the delicate
eigenvalue/singular-value handling is concentrated.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DegenerateBasisError,
    DimensionMismatchError,
    IndefiniteMatrixError,
    NonSymmetricError,
    NotPositiveDefiniteError,
)

EPS = float(np.finfo(np.float64).eps)


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and return a finite float64 2-d array."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_vector(v, name: str = "vector") -> np.ndarray:
    """Validate and return a finite float64 1-d array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def symmetry_gap(m: np.ndarray) -> float:
    """Max-norm of M - M^T."""
    return float(np.max(np.abs(m - m.T))) if m.size else 0.0


def require_symmetric(m: np.ndarray, tol: float | None = None, name: str = "matrix") -> np.ndarray:
    """Check symmetry within tolerance and return the symmetrized matrix.

    The default tolerance is 1e-10 relative to the largest entry, which keeps
    honest covariances while rejecting matrices that are structurally
    non-symmetric.
    """
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if tol is None:
        tol = 1e-10 * scale
    gap = symmetry_gap(m)
    if gap > tol:
        raise NonSymmetricError(f"{name} is not symmetric: max|M - M^T| = {gap:.3e} > {tol:.3e}")
    return 0.5 * (m + m.T)


def sym_psd_sqrt(m, *, sym_tol: float | None = None, eig_tol: float | None = None) -> np.ndarray:
    """Unique symmetric PSD square root R with R @ R = M.

    Computed by eigendecomposition.  Eigenvalues in [-eig_tol, 0) are clamped
    to zero; anything below -eig_tol raises IndefiniteMatrixError, since
    silently clamping a genuinely indefinite matrix would mask upstream bugs.
    """
    sym = require_symmetric(m, sym_tol)
    if sym.size == 0:
        return sym.copy()
    w, v = np.linalg.eigh(sym)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if eig_tol is None:
        eig_tol = sym.shape[0] * EPS * max(scale, 1.0) * 100.0
    if w[0] < -eig_tol:
        raise IndefiniteMatrixError(
            f"matrix has eigenvalue {w[0]:.3e} below -{eig_tol:.3e}; not PSD"
        )
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.T
    return 0.5 * (root + root.T)


def psd_factor(m, *, sym_tol: float | None = None, eig_tol: float | None = None) -> np.ndarray:
    """Thin factor F (d x r) with F @ F.T = M, r = number of retained eigenvalues.

    Same clamping contract as sym_psd_sqrt, but the output drops the null
    directions, which is the natural covariance-factor representation.
    """
    sym = require_symmetric(m, sym_tol)
    if sym.size == 0:
        return sym.copy()
    w, v = np.linalg.eigh(sym)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if eig_tol is None:
        eig_tol = sym.shape[0] * EPS * max(scale, 1.0) * 100.0
    if w.size and w[0] < -eig_tol:
        raise IndefiniteMatrixError(
            f"matrix has eigenvalue {w[0]:.3e} below -{eig_tol:.3e}; not PSD"
        )
    keep = w > max(scale, 0.0) * sym.shape[0] * EPS
    return v[:, keep] * np.sqrt(w[keep])


def cholesky_factor(m, *, sym_tol: float | None = None) -> np.ndarray:
    """Lower-triangular L with L @ L.T = M, for symmetric positive definite M."""
    sym = require_symmetric(m, sym_tol)
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"Cholesky failed: {exc}") from exc


def default_cutoff(shape: tuple[int, int]) -> float:
    """Relative singular-value cutoff: max(rows, cols) * machine epsilon."""
    return max(shape) * EPS


def pseudo_inverse(m, cutoff: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values at or below ``cutoff * sigma_max`` are treated as exact
    zeros.  The result satisfies the four Penrose identities to roughly
    ``sigma_max / sigma_smallest_kept`` times machine epsilon.
    """
    m = as_matrix(m)
    if cutoff is None:
        cutoff = default_cutoff(m.shape)
    if not 0.0 < cutoff < 1.0:
        raise ValueError(f"cutoff must lie in (0, 1), got {cutoff}")
    if m.size == 0:
        return m.T.copy()
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros_like(m.T)
    inv = np.where(s > cutoff * s[0], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    return (vt.T * inv) @ u.T


def numerical_rank(m, cutoff: float | None = None) -> int:
    """Number of singular values above ``cutoff * sigma_max``; 0 for the zero matrix."""
    m = as_matrix(m)
    if cutoff is None:
        cutoff = default_cutoff(m.shape)
    if not 0.0 < cutoff < 1.0:
        raise ValueError(f"cutoff must lie in (0, 1), got {cutoff}")
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > cutoff * s[0]))


def _weight_matrix(weight) -> np.ndarray:
    # Accepts either an InnerProductWeight or a raw SPD matrix.
    return getattr(weight, "matrix", weight)


def weighted_projection(basis, weight) -> np.ndarray:
    """Orthogonal projection onto span(basis), self-adjoint in the W inner product.

    Returns P = B (B^T W B)^{-1} B^T W, which satisfies P @ P = P,
    W @ P = (W @ P)^T and range(P) = span(basis).  An empty basis yields the
    zero matrix of the ambient dimension inferred from W.
    """
    w = as_matrix(_weight_matrix(weight), "weight")
    vectors = [as_vector(v, "basis vector") for v in basis]
    d = w.shape[0]
    if not vectors:
        return np.zeros((d, d))
    b = np.stack(vectors, axis=1)
    if b.shape[0] != d:
        raise DimensionMismatchError(
            f"basis vectors have dimension {b.shape[0]}, weight expects {d}"
        )
    gram = b.T @ w @ b
    gram = 0.5 * (gram + gram.T)
    lam = np.linalg.eigvalsh(gram)
    if lam[0] <= gram.shape[0] * EPS * max(lam[-1], 0.0) or lam[0] <= 0.0:
        raise DegenerateBasisError(
            f"basis Gram matrix numerically singular (eigenvalues {lam[0]:.3e} .. {lam[-1]:.3e})"
        )
    coeffs = np.linalg.solve(gram, b.T @ w)
    return b @ coeffs
