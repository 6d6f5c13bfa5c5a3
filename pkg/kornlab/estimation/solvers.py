"""Matrix-free iterative solvers working on flat coordinate vectors of an admissible class."""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from kornlab.estimation.exceptions import KernelLeakError

__all__ = (
    "AscentResult",
    "EigenResult",
    "inverse_iteration",
    "projected_ascent",
)

logger = logging.getLogger(__name__)

SHIFT = 1e-12
"""Relative shift of the inner solves, ``K + SHIFT · θ_max M``."""

ORTH_RCOND = 1e-10
"""Directions of a search basis below this relative singular value are dropped."""

Operator = Callable[[np.ndarray], np.ndarray]
Objective = Callable[[np.ndarray], Tuple[float, float, float, np.ndarray]]


@dataclass
class EigenResult:
    """Outcome of `inverse_iteration`."""

    eigenvalue: float
    eigenvector: np.ndarray
    """Normalized to unit mass, ``xᵀ M x = 1``."""
    iterations: int
    residual: float
    """``‖Π(Kx - λMx)‖ / ‖ΠKx‖``"""
    converged: bool
    trace: List[float] = field(default_factory=list)
    """Smallest Ritz value after every step."""
    initial_ritz_max: float = np.nan
    """Largest Ritz value of the starting block, a scale for near-zero checks."""


@dataclass
class AscentResult:
    """Outcome of `projected_ascent`."""

    x: np.ndarray
    value: float
    lhs: float
    rhs: float
    iterations: int
    converged: bool
    trace: List[float] = field(default_factory=list)
    """Quotient value before the first and after every accepted step."""


def _apply_columns(operator: Operator, X: np.ndarray) -> np.ndarray:
    return np.column_stack([operator(X[:, c]) for c in range(X.shape[1])])


def _rayleigh_ritz(
    stiffness: Operator, mass: Operator, basis: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Ritz values and M-orthonormal Ritz vectors of the pencil ``(K, M)`` on ``span(basis)``."""
    KQ = _apply_columns(stiffness, basis)
    MQ = _apply_columns(mass, basis)
    Kr = basis.T @ KQ
    Mr = basis.T @ MQ
    theta, C = scipy.linalg.eigh((Kr + Kr.T) / 2, (Mr + Mr.T) / 2)
    return theta, basis @ C, KQ @ C, MQ @ C


def _residual(project: Operator, Kx: np.ndarray, Mx: np.ndarray, eigenvalue: float) -> float:
    """``‖Π(Kx - λMx)‖ / ‖ΠKx‖``"""
    Kx = project(Kx)
    norm = float(np.linalg.norm(Kx))
    return float(np.linalg.norm(Kx - eigenvalue * project(Mx))) / norm if norm > 0 else 0.0


def _basis(blocks: List[np.ndarray], project: Operator, size: int) -> np.ndarray:
    """Orthonormal basis of the projected block columns, projected once more after orthonormalization."""
    columns = []
    for block in blocks:
        for c in range(block.shape[1]):
            column = project(block[:, c])
            norm = np.linalg.norm(column)
            if norm > 0:
                columns.append(column / norm)
    if not columns:
        return np.empty((size, 0))
    Q = scipy.linalg.orth(np.column_stack(columns), rcond=ORTH_RCOND)
    return np.column_stack([project(Q[:, c]) for c in range(Q.shape[1])])


def inverse_iteration(
    stiffness: Operator,
    mass: Operator,
    project: Operator,
    size: int,
    *,
    rng: np.random.Generator,
    block_size: int = 4,
    max_iter: int = 500,
    tol_rel: float = 1e-10,
    start: Optional[np.ndarray] = None,
    preconditioner: Optional[np.ndarray] = None,
    cg_rtol: float = 1e-10,
) -> EigenResult:
    """Smallest eigenpair of ``K x = λ M x`` on the range of the projector ``Π``.

    Every step solves ``Π(K + σM)Π W = Π(KX - MXΘ)`` (``σ`` a tiny shift) column by column with
    preconditioned conjugate gradients. The new block comes from Rayleigh–Ritz on the span of the
    current block ``X``, the corrections ``W`` and the previous search directions, the locally
    optimal form of block inverse iteration, which also converges on tightly clustered spectra.

    Parameters
    ----------
    stiffness, mass : callable
        Symmetric operators ``K`` and ``M``; ``M`` must be positive definite on the range of ``Π``.
    project : callable
        Euclidean orthogonal projector ``Π`` onto the constrained subspace.
    size : int
        Length of coordinate vectors.
    rng : numpy.random.Generator
        Source of the random starting block.
    block_size : int
        Number of simultaneously iterated vectors.
    max_iter : int
        Maximum number of steps.
    tol_rel : float
        Stop once the eigen residual ``‖Π(Kx - λMx)‖ / ‖ΠKx‖`` of the smallest Ritz pair is at most
        ``tol_rel``.
    start : array, optional
        Vector used as the first column of the starting block.
    preconditioner : array, optional
        Diagonal of ``M``; CG is preconditioned with ``Π diag(M)⁻¹ Π`` when given.
    cg_rtol : float
        Relative tolerance of the inner CG solves.

    Returns
    -------
    result : EigenResult
    """
    columns = [] if start is None else [project(np.asarray(start, dtype=float))]
    while len(columns) < block_size:
        columns.append(project(rng.standard_normal(size)))
    X = _basis([np.column_stack(columns)], project, size)
    if X.shape[1] == 0:
        raise ValueError("The starting block projects to zero.")
    theta, X, KX, MX = _rayleigh_ritz(stiffness, mass, X)
    initial_ritz_max = float(theta[-1])
    # a tiny positive shift keeps the solves definite if K leaks a kernel into the subspace
    shift = SHIFT * initial_ritz_max

    def projected_stiffness(v: np.ndarray) -> np.ndarray:
        v = project(v)
        return project(stiffness(v) + shift * mass(v))

    operator = scipy.sparse.linalg.LinearOperator((size, size), matvec=projected_stiffness, dtype=float)
    M_inv = None
    if preconditioner is not None:
        inverse_diagonal = 1 / np.asarray(preconditioner)
        M_inv = scipy.sparse.linalg.LinearOperator(
            (size, size), matvec=lambda v: project(inverse_diagonal * project(v)), dtype=float
        )

    eigenvalue = float(theta[0])
    residual = _residual(project, KX[:, 0], MX[:, 0], eigenvalue)
    trace = [eigenvalue]
    converged = residual <= tol_rel
    iterations = 0
    directions: Optional[np.ndarray] = None
    while not converged and iterations < max_iter:
        iterations += 1
        R = KX - MX * theta
        W = np.empty_like(R)
        for c in range(R.shape[1]):
            W[:, c], info = scipy.sparse.linalg.cg(
                operator, project(R[:, c]), rtol=cg_rtol, atol=0.0, M=M_inv, maxiter=10 * size
            )
            if info > 0:
                logger.warning("CG did not reach rtol=%.1e within %i iterations.", cg_rtol, info)
        blocks = [X, W] if directions is None else [X, W, directions]
        Q = _basis(blocks, project, size)
        theta, V, KV, MV = _rayleigh_ritz(stiffness, mass, Q)
        k = min(block_size, V.shape[1])
        # the part of the new block that is M-orthogonal to the old one
        directions = V[:, :k] - X @ (MX.T @ V[:, :k])
        theta, X, KX, MX = theta[:k], V[:, :k], KV[:, :k], MV[:, :k]
        eigenvalue = float(theta[0])
        residual = _residual(project, KX[:, 0], MX[:, 0], eigenvalue)
        trace.append(eigenvalue)
        logger.debug("Inverse iteration %i: λ=%.12e, residual %.2e", iterations, eigenvalue, residual)
        converged = residual <= tol_rel

    if converged:
        logger.info("Inverse iteration converged after %i steps: λ=%.10e", iterations, eigenvalue)
    else:
        logger.warning(
            "Inverse iteration did not converge in %i steps (λ=%.10e, residual %.2e).",
            max_iter,
            eigenvalue,
            residual,
        )
    return EigenResult(
        eigenvalue=eigenvalue,
        eigenvector=X[:, 0],
        iterations=iterations,
        residual=residual,
        converged=converged,
        trace=trace,
        initial_ritz_max=initial_ritz_max,
    )


def projected_ascent(
    objective: Objective,
    project: Operator,
    x0: np.ndarray,
    *,
    what: str = "the admissible class",
    max_iter: int = 500,
    tol_rel: float = 1e-10,
    armijo: float = 1e-4,
    min_step: float = 1e-12,
) -> AscentResult:
    """Maximizes a 0-homogeneous quotient over the range of ``project``.

    The search direction is the projected gradient scaled to the length of the iterate.
    Steps backtrack from 1 by halving until the Armijo condition holds, so accepted values never
    decrease. Iterates are renormalized to unit length.

    Parameters
    ----------
    objective : callable
        Maps ``x`` to ``(R, lhs, rhs, ∇R)``.
    project : callable
        Euclidean orthogonal projector onto the constrained subspace.
    x0 : array
        Starting point; its right-hand side must not vanish.
    what : str
        Name of the admissible class for diagnostics.

    Raises
    ------
    KernelLeakError
        When a trial point has a right-hand side below ``1e-14`` times its left-hand side.
    """
    x = project(np.asarray(x0, dtype=float))
    x = x / np.linalg.norm(x)
    value, lhs, rhs, gradient = objective(x)
    if rhs < 1e-14 * lhs:
        raise KernelLeakError(what, rhs, lhs)
    trace = [value]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        direction = project(gradient)
        slope = float(np.linalg.norm(direction))
        if slope == 0:
            converged = True
            break
        direction = direction / slope
        step = 1.0
        while step >= min_step:
            candidate = x + step * direction
            candidate = candidate / np.linalg.norm(candidate)
            c_value, c_lhs, c_rhs, c_gradient = objective(candidate)
            if c_rhs < 1e-14 * c_lhs:
                raise KernelLeakError(what, c_rhs, c_lhs)
            if c_value >= value + armijo * step * slope:
                break
            step /= 2
        else:
            logger.debug("Backtracking found no ascent at R=%.12e; stopping.", value)
            converged = True
            break
        change = (c_value - value) / value
        x, value, lhs, rhs, gradient = candidate, c_value, c_lhs, c_rhs, c_gradient
        trace.append(value)
        logger.debug("Ascent step %i: R=%.12e (t=%.3g)", iterations, value, step)
        if change < tol_rel:
            converged = True
            break
    if not converged:
        logger.warning("Projected ascent did not converge in %i steps (R=%.10e).", max_iter, value)
    return AscentResult(
        x=x, value=value, lhs=lhs, rhs=rhs, iterations=iterations, converged=converged, trace=trace
    )
