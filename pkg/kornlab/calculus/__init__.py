"""Pointwise algebra, box grids, finite-difference operators and boundary traces."""
from kornlab.calculus import algebra, operators, traces
from kornlab.calculus.domain import (
    BoundaryFacet,
    Face,
    FacetClass,
    GridDomain,
    QuadratureWeights,
    all_faces,
    build_grid,
    classify_boundary,
    lp_norm,
    lp_norm_gradient,
    parse_faces,
)
from kornlab.calculus.exceptions import (
    DegenerateInputError,
    DimensionMismatchError,
    EmptyGammaError,
    InvalidExponentError,
    InvalidGridError,
)
from kornlab.calculus.manufactured import PolynomialField
