from . import calculus, estimation, identities, oracle, reports
from .calculus import (
    DegenerateInputError,
    DimensionMismatchError,
    EmptyGammaError,
    Face,
    GridDomain,
    InvalidExponentError,
    InvalidGridError,
    algebra,
    build_grid,
    operators,
    traces,
)
from .estimation import (
    EmptySubspaceError,
    EstimatorConfig,
    EstimatorError,
    EstimatorReport,
    Inequality,
    KernelLeakError,
    estimate,
    estimate_constant_lp,
    estimate_constant_p2,
    estimate_quotient_constant,
    poincare_skew_constant,
    tangential_korn_constant,
)
from .identities import IDENTITIES, verify_identities
from .oracle import DenseOperator, NotPositiveDefiniteError, OracleSizeError, assemble, full_spectrum
from .reports import ReportFile, RunConfig

__version__ = "0.1.0"
__all__ = (
    "algebra",
    "assemble",
    "build_grid",
    "calculus",
    "DegenerateInputError",
    "DenseOperator",
    "DimensionMismatchError",
    "EmptyGammaError",
    "EmptySubspaceError",
    "estimate",
    "estimate_constant_lp",
    "estimate_constant_p2",
    "estimate_quotient_constant",
    "estimation",
    "EstimatorConfig",
    "EstimatorError",
    "EstimatorReport",
    "Face",
    "full_spectrum",
    "GridDomain",
    "IDENTITIES",
    "identities",
    "Inequality",
    "InvalidExponentError",
    "InvalidGridError",
    "KernelLeakError",
    "NotPositiveDefiniteError",
    "operators",
    "oracle",
    "OracleSizeError",
    "poincare_skew_constant",
    "ReportFile",
    "reports",
    "RunConfig",
    "tangential_korn_constant",
    "traces",
    "verify_identities",
)
