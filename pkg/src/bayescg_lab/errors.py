"""Exception types shared across the lab."""


class LabError(Exception):
    """Base class for all errors raised by this package."""


class NonSymmetricError(LabError):
    """A matrix required to be symmetric is not, beyond tolerance."""


class IndefiniteMatrixError(LabError):
    """A matrix required to be positive semidefinite has a genuinely negative eigenvalue."""


class NotPositiveDefiniteError(LabError):
    """Cholesky-style factorization failed: the matrix is not positive definite."""


class DegenerateBasisError(LabError):
    """Vectors expected to be linearly independent are numerically dependent."""


class DegenerateObservationsError(LabError):
    """The observation Gram matrix is numerically singular."""


class DimensionMismatchError(LabError):
    """Operands have incompatible dimensions."""


class InvalidPriorError(LabError):
    """A prior specification is inconsistent with the problem (non-PD payload, wrong shape, ...)."""


class SingularPriorError(LabError):
    """The prior covariance cannot be inverted for a diagnostic that needs its inverse."""


class BreakdownError(LabError):
    """A candidate search direction has numerically zero conjugate norm.

    For rank-deficient systems this is the expected, informative stopping
    event rather than a failure; ``state`` and ``trace`` (when available)
    carry the progress made up to the breakdown.
    """

    def __init__(self, message, *, state=None, trace=None):
        super().__init__(message)
        self.state = state
        self.trace = trace


class UsageError(LabError):
    """Invalid command line or configuration input."""
