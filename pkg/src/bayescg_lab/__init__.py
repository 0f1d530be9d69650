"""bayescg-lab: a laboratory for the Bayesian conjugate gradient method.

Gaussian-belief linear solving with factored covariances, exact-conditioning
and pseudo-inverse oracles, and a statistical calibration harness.
"""

from .calibration import (
    BayesianAccuracyResult,
    CalibrationConfig,
    CalibrationReport,
    CostFactorReport,
    bayesian_accuracy_study,
    calibration_scenarios,
    chi2_cdf,
    chi2_quantile,
    cost_factor_study,
    ks_statistic,
    ks_two_sample,
    run_calibration,
    z_statistic,
)
from .errors import (
    BreakdownError,
    DegenerateBasisError,
    DegenerateObservationsError,
    DimensionMismatchError,
    IndefiniteMatrixError,
    InvalidPriorError,
    LabError,
    NonSymmetricError,
    NotPositiveDefiniteError,
    SingularPriorError,
    UsageError,
)
from .gaussian import (
    WEIGHT_TAGS,
    GaussianBelief,
    InnerProductWeight,
    all_weights,
    gaussian_w2_distance,
    make_weight,
    sample_gaussian,
)
from .linalg import (
    cholesky_factor,
    numerical_rank,
    pseudo_inverse,
    psd_factor,
    sym_psd_sqrt,
    weighted_projection,
)
from .oracle import (
    BeliefDistance,
    ConditioningResult,
    LinearObservations,
    build_mu_m,
    compare_beliefs,
    conditioning_comparison,
    exact_condition,
    nullspace_candidate_angles,
    posterior_nullspace_basis,
)
from .pinv import PinvStudyConfig, PinvStudyReport, moore_penrose_solve, run_pinv_study
from .problems import (
    LinearProblem,
    random_nonsymmetric_problem,
    random_rank_problem,
    random_spd_problem,
)
from .solver import (
    OpCounter,
    Prior,
    PriorSpec,
    SolverState,
    SolverTrace,
    TerminationPolicy,
    bayescg_solve,
    bayescg_step,
    classical_cg_solve,
    initial_state,
    make_prior,
    max_offdiagonal_conjugacy,
    trace_diagnostic,
)

__version__ = "0.1.0"

__all__ = [
    "BayesianAccuracyResult",
    "BeliefDistance",
    "BreakdownError",
    "CalibrationConfig",
    "CalibrationReport",
    "ConditioningResult",
    "CostFactorReport",
    "DegenerateBasisError",
    "DegenerateObservationsError",
    "DimensionMismatchError",
    "GaussianBelief",
    "IndefiniteMatrixError",
    "InnerProductWeight",
    "InvalidPriorError",
    "LabError",
    "LinearObservations",
    "LinearProblem",
    "NonSymmetricError",
    "NotPositiveDefiniteError",
    "OpCounter",
    "PinvStudyConfig",
    "PinvStudyReport",
    "Prior",
    "PriorSpec",
    "SingularPriorError",
    "SolverState",
    "SolverTrace",
    "TerminationPolicy",
    "UsageError",
    "WEIGHT_TAGS",
    "__version__",
    "all_weights",
    "bayescg_solve",
    "bayescg_step",
    "bayesian_accuracy_study",
    "build_mu_m",
    "calibration_scenarios",
    "chi2_cdf",
    "chi2_quantile",
    "cholesky_factor",
    "classical_cg_solve",
    "compare_beliefs",
    "conditioning_comparison",
    "cost_factor_study",
    "exact_condition",
    "gaussian_w2_distance",
    "initial_state",
    "ks_statistic",
    "ks_two_sample",
    "make_prior",
    "make_weight",
    "max_offdiagonal_conjugacy",
    "moore_penrose_solve",
    "nullspace_candidate_angles",
    "numerical_rank",
    "posterior_nullspace_basis",
    "psd_factor",
    "pseudo_inverse",
    "random_nonsymmetric_problem",
    "random_rank_problem",
    "random_spd_problem",
    "run_calibration",
    "run_pinv_study",
    "sample_gaussian",
    "sym_psd_sqrt",
    "trace_diagnostic",
    "weighted_projection",
    "z_statistic",
]
