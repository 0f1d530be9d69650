"""Gaussian beliefs with factored covariances, sampling, and the 2-Wasserstein metric.

A belief stores its covariance as a d x r factor F with Sigma = F @ F.T.  That
keeps positive semidefiniteness exact by construction: the solver's posterior
covariance is singular for every m >= 1, and carrying the full matrix through
repeated subtractions would destroy PSD-ness numerically.  A factor with zero
columns is a Dirac.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import DimensionMismatchError
from .linalg import as_matrix, as_vector, require_symmetric, sym_psd_sqrt

WEIGHT_TAGS = ("euclidean", "a", "sigma0", "a_sigma0_at")


class GaussianBelief:
    """Normal distribution N(mean, F F^T) over solution vectors.

    The factor may be supplied directly or as a zero-argument callable that
    builds it on first access; the solver uses the deferred form so that a
    plain solve never pays for materializing per-step covariances it does not
    need.  Instances are value-like: treat the arrays as read-only.
    """

    def __init__(self, mean, covariance_factor=None, *, factor_fn=None, rank_hint=None):
        self._mean = as_vector(mean, "mean")
        if (covariance_factor is None) == (factor_fn is None):
            raise ValueError("provide exactly one of covariance_factor / factor_fn")
        self._factor = None
        self._factor_fn = factor_fn
        self._cov = None
        if covariance_factor is not None:
            self._factor = self._check_factor(covariance_factor)
        self._rank_hint = rank_hint

    def _check_factor(self, factor) -> np.ndarray:
        f = np.asarray(factor, dtype=np.float64)
        if f.ndim == 1:
            f = f.reshape(-1, 1)
        f = as_matrix(f, "covariance factor")
        if f.shape[0] != self._mean.shape[0]:
            raise DimensionMismatchError(
                f"covariance factor has {f.shape[0]} rows, mean has dimension {self.dim}"
            )
        return f

    @property
    def dim(self) -> int:
        return self._mean.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self._mean

    @property
    def covariance_factor(self) -> np.ndarray:
        if self._factor is None:
            self._factor = self._check_factor(self._factor_fn())
            self._factor_fn = None
        return self._factor

    @property
    def rank_hint(self) -> int:
        if self._rank_hint is not None:
            return self._rank_hint
        f = self.covariance_factor
        return min(f.shape)

    @property
    def is_dirac(self) -> bool:
        if self._factor is None and self._rank_hint == 0:
            return True
        return self.covariance_factor.shape[1] == 0

    def covariance(self) -> np.ndarray:
        """Dense covariance F @ F.T (cached)."""
        if self._cov is None:
            f = self.covariance_factor
            self._cov = f @ f.T
        return self._cov

    def covariance_trace(self) -> float:
        f = self.covariance_factor
        return float(np.sum(f * f))

    @classmethod
    def dirac(cls, point) -> "GaussianBelief":
        point = as_vector(point, "point")
        return cls(point, np.zeros((point.shape[0], 0)), rank_hint=0)

    def __repr__(self) -> str:
        r = self._factor.shape[1] if self._factor is not None else "deferred"
        return f"GaussianBelief(dim={self.dim}, factor_cols={r})"


@dataclass(frozen=True)
class InnerProductWeight:
    """A weighted inner product <x, y> = x^T W y with W symmetric positive definite."""

    tag: str
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.tag not in WEIGHT_TAGS:
            raise ValueError(f"unknown weight tag {self.tag!r}; expected one of {WEIGHT_TAGS}")
        w = require_symmetric(self.matrix, name=f"weight[{self.tag}]")
        lam_min = float(np.linalg.eigvalsh(w)[0])
        if lam_min <= 0.0:
            raise ValueError(
                f"weight[{self.tag}] is not positive definite (lambda_min = {lam_min:.3e})"
            )
        object.__setattr__(self, "matrix", w)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def make_weight(tag: str, a: np.ndarray | None = None, prior_covariance: np.ndarray | None = None) -> InnerProductWeight:
    """Build one of the four named inner products from the problem operator and prior.

    ``euclidean`` needs nothing, ``a`` needs a symmetric PD operator, ``sigma0``
    the prior covariance, and ``a_sigma0_at`` both (A may be non-symmetric there).
    """
    if tag == "euclidean":
        for ref in (a, prior_covariance):
            if ref is not None:
                return InnerProductWeight(tag, np.eye(as_matrix(ref).shape[0]))
        raise ValueError("euclidean weight needs a or prior_covariance to infer the dimension")
    if tag == "a":
        if a is None:
            raise ValueError("a-weighted inner product needs the operator")
        return InnerProductWeight(tag, a)
    if tag == "sigma0":
        if prior_covariance is None:
            raise ValueError("sigma0-weighted inner product needs the prior covariance")
        return InnerProductWeight(tag, prior_covariance)
    if tag == "a_sigma0_at":
        if a is None or prior_covariance is None:
            raise ValueError("a_sigma0_at-weighted inner product needs both operator and prior")
        a = as_matrix(a)
        return InnerProductWeight(tag, a @ as_matrix(prior_covariance) @ a.T)
    raise ValueError(f"unknown weight tag {tag!r}")


def all_weights(a: np.ndarray, prior_covariance: np.ndarray) -> dict[str, InnerProductWeight]:
    """All four named weights for a symmetric PD operator."""
    return {tag: make_weight(tag, a, prior_covariance) for tag in WEIGHT_TAGS}


def sample_gaussian(belief: GaussianBelief, rng_seed, n: int) -> np.ndarray:
    """Draw n independent samples, returned as an (n, d) array.

    ``rng_seed`` is either an integer (expanded through the "sample-gaussian"
    stream, so the same seed always reproduces the same draws) or an existing
    numpy Generator.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(rng_seed, np.random.Generator):
        gen = rng_seed
    else:
        gen = _rng.stream(int(rng_seed), "sample-gaussian")
    f = belief.covariance_factor
    r = f.shape[1]
    if r == 0:
        return np.tile(belief.mean, (n, 1))
    z = gen.standard_normal((r, n))
    return (belief.mean[:, None] + f @ z).T


def gaussian_w2_distance(p: GaussianBelief, q: GaussianBelief) -> float:
    """2-Wasserstein distance between Gaussians, via the closed form

        W2^2 = ||mu_p - mu_q||^2
             + tr(Sigma_p) + tr(Sigma_q) - 2 tr((Sigma_q^{1/2} Sigma_p Sigma_q^{1/2})^{1/2}).

    The matrix square roots go through sym_psd_sqrt; roundoff can push the
    trace term slightly negative, which is clamped at zero.
    """
    if p.dim != q.dim:
        raise DimensionMismatchError(f"beliefs have dimensions {p.dim} and {q.dim}")
    if np.array_equal(p.mean, q.mean) and np.array_equal(p.covariance_factor,
                                                         q.covariance_factor):
        return 0.0  # W2 of a distribution with itself; dodge sqrt roundoff
    mean_term = float(np.sum((p.mean - q.mean) ** 2))
    cov_p = p.covariance()
    cov_q = q.covariance()
    root_q = sym_psd_sqrt(cov_q)
    inner = root_q @ cov_p @ root_q
    cross = sym_psd_sqrt(0.5 * (inner + inner.T))
    trace_term = float(np.trace(cov_p) + np.trace(cov_q) - 2.0 * np.trace(cross))
    return float(np.sqrt(max(mean_term + trace_term, 0.0)))
