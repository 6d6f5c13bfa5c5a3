"""Admissible field classes, iterative solvers and the constant estimators."""
from kornlab.estimation import admissible, solvers
from kornlab.estimation.admissible import (
    AdmissibleClass,
    MatrixFields,
    QuotientFields,
    ScalarVanishingFields,
    TangentialGradients,
    VanishingSkewFields,
    best_skew_approximation,
)
from kornlab.estimation.estimators import (
    EstimatorConfig,
    EstimatorReport,
    Inequality,
    build_problem,
    estimate,
    estimate_constant_lp,
    estimate_constant_p2,
    estimate_quotient_constant,
    poincare_skew_constant,
    rhs_functional,
    scalar_poincare_constant,
    tangential_korn_constant,
)
from kornlab.estimation.exceptions import EmptySubspaceError, EstimatorError, KernelLeakError
