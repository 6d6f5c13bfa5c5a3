"""Estimation of the discrete optimal constants of the Korn-type inequalities.

Two routes exist:
- ``p = 2``: the constant is ``λ_min^{-1/2}`` of the quadratic-form eigenproblem, computed by
  block inverse iteration (`estimate_constant_p2`).
- any ``1 < p < ∞``: the quotient ``lhs / rhs`` is maximized by multi-start projected ascent. The
  best value is a lower bound of the discrete optimal constant, certified by its minimizer.
"""
import concurrent.futures
import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from kornlab.calculus import algebra, operators, traces
from kornlab.calculus.domain import GridDomain, all_faces, lp_norm, validate_exponent
from kornlab.calculus.exceptions import DimensionMismatchError
from kornlab.estimation.admissible import (
    AdmissibleClass,
    MatrixFields,
    QuotientFields,
    ScalarVanishingFields,
    TangentialGradients,
    VanishingSkewFields,
)
from kornlab.estimation.exceptions import KernelLeakError
from kornlab.estimation.solvers import AscentResult, EigenResult, inverse_iteration, projected_ascent
from kornlab.utils import get_worker_count, make_rng

__all__ = (
    "build_problem",
    "estimate",
    "estimate_constant_lp",
    "estimate_constant_p2",
    "estimate_quotient_constant",
    "EstimatorConfig",
    "EstimatorReport",
    "Inequality",
    "poincare_skew_constant",
    "rhs_functional",
    "scalar_poincare_constant",
    "tangential_korn_constant",
)

logger = logging.getLogger(__name__)

LEAK_THRESHOLD = 1e-10
"""Eigenvalues below this fraction of the starting block's largest Ritz value count as kernel."""
DEGENERATE_RHS = 1e-14
MAX_RESEEDS = 3


class Inequality(str, enum.Enum):
    """Selector over the supported inequalities."""

    KORN_FULL_BC = "korn_full_bc"
    """``‖P‖ ≤ c (‖sym P‖ + ‖Curl P‖)`` with zero tangential trace on the whole boundary"""
    KORN_PARTIAL_BC = "korn_partial_bc"
    """as above with zero tangential trace on a face set Γ"""
    KORN_QUOTIENT = "korn_quotient"
    """``inf_A ‖P - A‖ ≤ c (‖sym P‖ + ‖Curl P‖)``, infimum over constant skew ``A``"""
    TANGENTIAL_KORN = "tangential_korn"
    """``‖Du‖ ≤ c ‖sym Du‖`` with ``Du ⨯ ν = 0`` on Γ"""
    POINCARE_SKEW = "poincare_skew"
    """``‖A‖ ≤ c ‖Curl A‖`` for skew fields vanishing on Γ"""


@dataclass(frozen=True)
class EstimatorConfig:
    """Validated settings of one estimation run.

    ``gamma`` is normalized to a sorted tuple of faces. It is forced to all faces for
    ``korn_full_bc``, must be omitted for ``korn_quotient`` and is required otherwise.
    """

    inequality: Inequality
    grid: GridDomain
    p: float = 2.0
    gamma: Optional[Union[str, Sequence]] = None
    max_iter: int = 500
    tol_rel: float = 1e-10
    seed: int = 0
    n_starts: int = 8
    block_size: int = 4

    def __post_init__(self) -> None:
        inequality = Inequality(self.inequality)
        object.__setattr__(self, "inequality", inequality)
        object.__setattr__(self, "p", validate_exponent(self.p))
        if not self.tol_rel > 0:
            raise ValueError(f"tol_rel must be > 0, got {self.tol_rel}.")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be ≥ 1, got {self.max_iter}.")
        if self.n_starts < 1:
            raise ValueError(f"n_starts must be ≥ 1, got {self.n_starts}.")
        if self.block_size < 1:
            raise ValueError(f"block_size must be ≥ 1, got {self.block_size}.")
        if self.seed < 0:
            raise ValueError(f"seed must be ≥ 0, got {self.seed}.")

        if inequality == Inequality.KORN_FULL_BC:
            everything = all_faces(self.grid.dim)
            if self.gamma is not None and traces.resolve_gamma(self.grid, self.gamma) != everything:
                raise ValueError("korn_full_bc constrains all faces. Use korn_partial_bc for a face subset.")
            object.__setattr__(self, "gamma", everything)
        elif inequality == Inequality.KORN_QUOTIENT:
            if self.gamma is not None:
                raise ValueError("korn_quotient takes no boundary faces.")
        else:
            if self.gamma is None:
                raise ValueError(f"{inequality.value} needs a non-empty face set gamma.")
            object.__setattr__(self, "gamma", traces.resolve_gamma(self.grid, self.gamma))

    @property
    def gamma_labels(self) -> Optional[str]:
        if self.gamma is None:
            return None
        return ",".join(f.label for f in self.gamma)

    def solver_options(self) -> Dict[str, Any]:
        return dict(
            p=self.p,
            max_iter=self.max_iter,
            tol_rel=self.tol_rel,
            seed=self.seed,
            n_starts=self.n_starts,
            block_size=self.block_size,
        )


@dataclass
class EstimatorReport:
    """Result of an estimation run.

    ``constant_estimate == 1 / quotient_value`` holds for both routes.
    """

    constant_estimate: float
    quotient_value: float
    iterations: int
    residual: float
    converged: bool
    lower_bound: bool
    """True for the ascent route: the value is attained by ``minimizer``."""
    route: str
    minimizer: np.ndarray
    """Coordinates of the maximizing field in its admissible class."""
    minimizer_snapshot: np.ndarray
    trace: List[float] = field(default_factory=list)
    lambda_min: Optional[float] = None
    sum_form_bracket: Optional[Tuple[float, float]] = None
    """Interval containing the optimal constant of the summed right-hand side (``p = 2``)."""
    sum_form_value: Optional[float] = None
    """Summed-form quotient evaluated at the eigenvector."""
    start_labels: List[str] = field(default_factory=list)
    start_values: List[float] = field(default_factory=list)
    best_start: Optional[str] = None
    config: Optional[EstimatorConfig] = None


def rhs_functional(grid: GridDomain, P: np.ndarray, p: float) -> float:
    """``‖sym P‖_p + ‖Curl P‖_p`` of a matrix field."""
    n = grid.dim
    P = np.asarray(P, dtype=float)
    if P.shape != grid.shape + (n, n):
        raise DimensionMismatchError("matrix field", grid.shape + (n, n), P.shape)
    w = grid.weights
    return lp_norm(algebra.sym(P), p, w) + lp_norm(operators.curl_matrix(grid, P), p, w, skew_packed=True)


def build_problem(cfg: EstimatorConfig) -> AdmissibleClass:
    """The admissible class of the configured inequality."""
    if cfg.inequality in (Inequality.KORN_FULL_BC, Inequality.KORN_PARTIAL_BC):
        return MatrixFields(cfg.grid, cfg.gamma)
    if cfg.inequality == Inequality.KORN_QUOTIENT:
        return QuotientFields(cfg.grid)
    if cfg.inequality == Inequality.TANGENTIAL_KORN:
        return TangentialGradients(cfg.grid, cfg.gamma)
    return VanishingSkewFields(cfg.grid, cfg.gamma)


def _solve_eigen(
    problem: AdmissibleClass, *, max_iter: int, tol_rel: float, seed: int, block_size: int, **_
) -> EigenResult:
    problem.check_nonempty()
    result = inverse_iteration(
        problem.stiffness,
        problem.mass,
        problem.project,
        problem.size,
        rng=make_rng(seed),
        block_size=min(block_size, problem.dimension),
        max_iter=max_iter,
        tol_rel=tol_rel,
        preconditioner=problem.mass_diagonal(),
    )
    if result.eigenvalue < LEAK_THRESHOLD * result.initial_ritz_max:
        raise KernelLeakError(problem.name, float(np.sqrt(max(result.eigenvalue, 0.0))), 1.0)
    return result


def _eigen_report(problem: AdmissibleClass, result: EigenResult, p2_value: float) -> Dict[str, Any]:
    """Report fields shared by both routes when the ``p = 2`` eigenpair is known."""
    c = result.eigenvalue**-0.5
    bracket = (c / np.sqrt(2), c) if problem.rhs_terms == 2 else (c, c)
    return dict(lambda_min=result.eigenvalue, sum_form_bracket=bracket, sum_form_value=p2_value)


def _eigen_route(problem: AdmissibleClass, **options) -> EstimatorReport:
    result = _solve_eigen(problem, **options)
    x = result.eigenvector
    c = result.eigenvalue**-0.5
    logger.info("%s: λ_min=%.10e, c=%.10e", problem.name, result.eigenvalue, c)
    return EstimatorReport(
        constant_estimate=c,
        quotient_value=float(np.sqrt(result.eigenvalue)),
        iterations=result.iterations,
        residual=result.residual,
        converged=result.converged,
        lower_bound=False,
        route="eigen",
        minimizer=x,
        minimizer_snapshot=problem.snapshot(x),
        trace=result.trace,
        **_eigen_report(problem, result, problem.ratio(x, 2.0)),
    )


def _is_degenerate(problem: AdmissibleClass, x: np.ndarray, p: float) -> bool:
    if not np.any(x):
        return True
    return problem.rhs(x, p)[0] < DEGENERATE_RHS * problem.lhs(x, p)[0]


def _random_start(problem: AdmissibleClass, p: float, seed: int, index: int) -> np.ndarray:
    """A random start; degenerate draws are re-seeded up to `MAX_RESEEDS` times."""
    for attempt in range(MAX_RESEEDS + 1):
        x = problem.random_start(make_rng(seed, index, attempt))
        if not _is_degenerate(problem, x, p):
            return x
        logger.debug("Start %i attempt %i is degenerate; re-seeding.", index, attempt)
    lhs, rhs = problem.lhs(x, p)[0], problem.rhs(x, p)[0]
    raise KernelLeakError(problem.name, rhs, lhs)


def _starts(
    problem: AdmissibleClass, p: float, seed: int, n_starts: int, eigenvector: np.ndarray
) -> List[Tuple[str, np.ndarray]]:
    candidates = [("eigenvector", eigenvector)]
    candidates += [(f"coordinate {d}", x) for d, x in enumerate(problem.structured_starts())]
    starts = []
    for index, (label, x) in enumerate(candidates[:n_starts]):
        if _is_degenerate(problem, x, p):
            logger.debug("Replacing degenerate start '%s' by a random field.", label)
            label, x = f"random {index}", _random_start(problem, p, seed, index)
        starts.append((label, x))
    for index in range(len(starts), n_starts):
        starts.append((f"random {index}", _random_start(problem, p, seed, index)))
    return starts


def _ascent_route(
    problem: AdmissibleClass,
    *,
    p: float,
    max_iter: int,
    tol_rel: float,
    seed: int,
    n_starts: int,
    block_size: int,
) -> EstimatorReport:
    eigen = _solve_eigen(problem, max_iter=max_iter, tol_rel=tol_rel, seed=seed, block_size=block_size)
    starts = _starts(problem, p, seed, n_starts, eigen.eigenvector)

    def run(start: Tuple[str, np.ndarray]) -> AscentResult:
        return projected_ascent(
            lambda x: problem.ratio_and_gradient(x, p),
            problem.project,
            start[1],
            what=problem.name,
            max_iter=max_iter,
            tol_rel=tol_rel,
        )

    with concurrent.futures.ThreadPoolExecutor(max_workers=get_worker_count(len(starts))) as pool:
        results = list(pool.map(run, starts))
    best_index = min(range(len(results)), key=lambda i: (-results[i].value, i))
    best = results[best_index]

    value, _, _, gradient = problem.ratio_and_gradient(best.x, p)
    residual = float(np.linalg.norm(problem.project(gradient)) * np.linalg.norm(best.x) / value)
    logger.info(
        "%s, p=%g: best quotient %.10e from start '%s' (%i starts).",
        problem.name,
        p,
        value,
        starts[best_index][0],
        len(starts),
    )
    extra: Dict[str, Any] = {}
    if p == 2:
        extra = _eigen_report(problem, eigen, problem.ratio(eigen.eigenvector, 2.0))
    return EstimatorReport(
        constant_estimate=value,
        quotient_value=1 / value,
        iterations=best.iterations,
        residual=residual,
        converged=best.converged,
        lower_bound=True,
        route="ascent",
        minimizer=best.x,
        minimizer_snapshot=problem.snapshot(best.x),
        trace=best.trace,
        start_labels=[label for label, _ in starts],
        start_values=[r.value for r in results],
        best_start=starts[best_index][0],
        **extra,
    )


def _with_config(report: EstimatorReport, cfg: EstimatorConfig) -> EstimatorReport:
    report.config = cfg
    return report


def _require(cfg: EstimatorConfig, *allowed: Inequality) -> None:
    if cfg.inequality not in allowed:
        names = ", ".join(a.value for a in allowed)
        raise ValueError(
            f"Inequality '{cfg.inequality.value}' is not supported here. Expected one of: {names}."
        )


def estimate_constant_p2(cfg: EstimatorConfig) -> EstimatorReport:
    """Constant of the quadratic-form inequality at ``p = 2`` by inverse iteration.

    Reports ``c = λ_min^{-1/2}``. For the Korn inequalities with summed right-hand side the
    optimal constant of the summed form lies in ``sum_form_bracket = (c/√2, c)``.

    Raises
    ------
    EmptySubspaceError
        When the constraints leave only the zero field.
    KernelLeakError
        When ``λ_min`` is numerically zero.
    """
    if cfg.p != 2:
        raise ValueError(f"The eigen route needs p=2, got p={cfg.p}.")
    return _with_config(_eigen_route(build_problem(cfg), **cfg.solver_options()), cfg)


def estimate_constant_lp(cfg: EstimatorConfig) -> EstimatorReport:
    """Lower bound of the constant for general ``p`` by multi-start projected ascent.

    Starts are the ``p = 2`` eigenvector, the coordinate fields and seeded random fields.
    The run with the largest quotient wins; ties go to the earlier start.
    """
    return _with_config(_ascent_route(build_problem(cfg), **cfg.solver_options()), cfg)


def estimate_quotient_constant(cfg: EstimatorConfig) -> EstimatorReport:
    """Ascent on ``inf_A ‖P - A‖ / (‖sym P‖ + ‖Curl P‖)`` over unconstrained matrix fields."""
    _require(cfg, Inequality.KORN_QUOTIENT)
    return estimate_constant_lp(cfg)


def tangential_korn_constant(cfg: EstimatorConfig) -> EstimatorReport:
    """Constant of ``‖Du‖ ≤ c ‖sym Du‖`` under zero tangential trace of ``Du`` on Γ."""
    _require(cfg, Inequality.TANGENTIAL_KORN)
    if cfg.p == 2:
        return estimate_constant_p2(cfg)
    return estimate_constant_lp(cfg)


def poincare_skew_constant(cfg: EstimatorConfig) -> EstimatorReport:
    """Constant of ``‖A‖ ≤ c ‖Curl A‖`` for skew fields vanishing on Γ."""
    _require(cfg, Inequality.POINCARE_SKEW)
    if cfg.p == 2:
        return estimate_constant_p2(cfg)
    return estimate_constant_lp(cfg)


def scalar_poincare_constant(
    grid: GridDomain,
    gamma: Union[str, Sequence],
    p: float = 2.0,
    *,
    max_iter: int = 500,
    tol_rel: float = 1e-10,
    seed: int = 0,
    n_starts: int = 8,
) -> float:
    """Constant of ``‖f‖ ≤ c ‖∇f‖`` for scalar fields vanishing on Γ."""
    p = validate_exponent(p)
    problem = ScalarVanishingFields(grid, gamma)
    options = dict(p=p, max_iter=max_iter, tol_rel=tol_rel, seed=seed, n_starts=n_starts, block_size=4)
    if p == 2:
        return _eigen_route(problem, **options).constant_estimate
    return _ascent_route(problem, **options).constant_estimate


def estimate(cfg: EstimatorConfig) -> EstimatorReport:
    """Runs the route that fits the configured inequality and exponent."""
    if cfg.inequality == Inequality.KORN_QUOTIENT:
        return estimate_quotient_constant(cfg)
    if cfg.inequality == Inequality.TANGENTIAL_KORN:
        return tangential_korn_constant(cfg)
    if cfg.inequality == Inequality.POINCARE_SKEW:
        return poincare_skew_constant(cfg)
    if cfg.p == 2:
        return estimate_constant_p2(cfg)
    return estimate_constant_lp(cfg)
