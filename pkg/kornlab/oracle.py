"""Dense reference computations on tiny grids.

The quadratic forms of an admissible class are assembled as dense matrices in an orthonormal
basis of the constrained subspace. Their generalized spectrum is computed by a Cholesky
congruence followed by cyclic Jacobi rotations.
"""
import enum
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from kornlab.calculus.domain import GridDomain
from kornlab.estimation.admissible import AdmissibleClass, MatrixFields

__all__ = (
    "assemble",
    "assemble_problem",
    "DenseOperator",
    "Form",
    "full_spectrum",
    "jacobi_eigh",
    "kernel_dimension",
    "MAX_DIMENSION",
    "NotPositiveDefiniteError",
    "oracle_lambda_min",
    "OracleSizeError",
    "Spectrum",
)

logger = logging.getLogger(__name__)

MAX_DIMENSION = 20000


class OracleSizeError(ValueError):
    """Error indicating a problem too large for dense assembly."""

    def __init__(self, size: int) -> None:
        super().__init__(f"Dense assembly needs {size} unknowns, more than the limit of {MAX_DIMENSION}.")


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Error indicating a mass matrix without Cholesky factorization."""


class Form(str, enum.Enum):
    """Quadratic forms that `assemble` turns into dense matrices.

    ``korn`` is ``‖sym P‖² + ‖Curl P‖²`` and ``mass`` is the weighted ``‖P‖²``.
    """

    SYM = "sym"
    CURL = "curl"
    KORN = "korn"
    MASS = "mass"


@dataclass
class DenseOperator:
    """A quadratic form as a dense matrix in constrained coordinates."""

    matrix: np.ndarray
    basis: np.ndarray
    """Orthonormal columns mapping constrained coordinates to flat nodal fields."""

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[0])

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Action on a flat nodal field that lies in the constrained subspace."""
        return self.basis @ (self.matrix @ (self.basis.T @ x))

    @property
    def symmetry_error(self) -> float:
        scale = float(np.linalg.norm(self.matrix)) or 1.0
        return float(np.linalg.norm(self.matrix - self.matrix.T)) / scale


@dataclass
class Spectrum:
    """Generalized eigenpairs ``A x = λ B x`` with ``Xᵀ B X = I``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    """``‖A x - λ B x‖ / ‖A‖_F`` per pair."""
    orthonormality_error: float
    sweeps: int


def _subspace_basis(problem: AdmissibleClass) -> np.ndarray:
    if problem.size > MAX_DIMENSION:
        raise OracleSizeError(problem.size)
    projector = np.column_stack([problem.project(e) for e in np.eye(problem.size)])
    return scipy.linalg.orth(projector)


def _matrix(operator: Callable[[np.ndarray], np.ndarray], basis: np.ndarray) -> np.ndarray:
    matrix = basis.T @ np.column_stack([operator(basis[:, j]) for j in range(basis.shape[1])])
    return (matrix + matrix.T) / 2


def assemble(
    form: Union[str, Form], grid: GridDomain, gamma: Optional[Union[str, Sequence]] = None
) -> DenseOperator:
    """Dense matrix of a matrix-field quadratic form.

    Parameters
    ----------
    form : str
        ``"sym"`` for ``‖sym P‖²``, ``"curl"`` for ``‖Curl P‖²``, ``"korn"`` for their sum or
        ``"mass"`` for ``‖P‖²``.
    grid : GridDomain
        The grid.
    gamma : str or sequence, optional
        Faces with zero tangential trace.

    Raises
    ------
    OracleSizeError
        When the field has more than `MAX_DIMENSION` unknowns.
    """
    form = Form(form)
    problem = MatrixFields(grid, gamma)
    operator = {
        Form.SYM: problem.sym_form,
        Form.CURL: problem.curl_form,
        Form.KORN: problem.stiffness,
        Form.MASS: problem.mass,
    }[form]
    basis = _subspace_basis(problem)
    return DenseOperator(_matrix(operator, basis), basis)


def assemble_problem(problem: AdmissibleClass) -> Tuple[DenseOperator, DenseOperator]:
    """Dense stiffness and mass matrices of any admissible class."""
    basis = _subspace_basis(problem)
    stiffness = DenseOperator(_matrix(problem.stiffness, basis), basis)
    return stiffness, DenseOperator(_matrix(problem.mass, basis), basis)


def _round_robin(m: int) -> np.ndarray:
    """Pairings of ``m`` (even) indices: ``m - 1`` rounds of ``m/2`` disjoint pairs."""
    order = np.arange(m)
    rounds = []
    for _ in range(m - 1):
        rounds.append(np.stack([order[: m // 2], order[::-1][: m // 2]], axis=1))
        order = np.concatenate([order[:1], order[-1:], order[1:-1]])
    return np.array(rounds)


def jacobi_eigh(
    S: np.ndarray, *, tol: float = 1e-13, max_sweeps: int = 60
) -> Tuple[np.ndarray, np.ndarray, int]:
    """Eigen decomposition of a symmetric matrix by parallel-ordered cyclic Jacobi rotations.

    Each round annihilates the off-diagonal entries of ``m/2`` disjoint index pairs at once.

    Returns
    -------
    eigenvalues : ndarray
        Ascending.
    eigenvectors : ndarray
        Orthonormal columns.
    sweeps : int
        Number of full sweeps performed.
    """
    S = np.asarray(S, dtype=float)
    size = S.shape[0]
    m = size + size % 2
    A = np.zeros((m, m))
    A[:size, :size] = (S + S.T) / 2
    V = np.eye(m)
    scale = float(np.linalg.norm(A)) or 1.0
    rounds = _round_robin(m) if m > 1 else np.zeros((0, 0, 2), dtype=int)

    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        for pairs in rounds:
            P, Q = pairs[:, 0], pairs[:, 1]
            app, aqq, apq = A[P, P], A[Q, Q], A[P, Q]
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                tau = (aqq - app) / (2 * apq)
                t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1 + tau**2))
            t = np.where(apq == 0, 0.0, t)
            c = 1 / np.sqrt(1 + t**2)
            s = t * c
            AP, AQ = A[P, :], A[Q, :]
            A[P, :] = c[:, None] * AP - s[:, None] * AQ
            A[Q, :] = s[:, None] * AP + c[:, None] * AQ
            AP, AQ = A[:, P], A[:, Q]
            A[:, P] = c * AP - s * AQ
            A[:, Q] = s * AP + c * AQ
            VP, VQ = V[:, P], V[:, Q]
            V[:, P] = c * VP - s * VQ
            V[:, Q] = s * VP + c * VQ
        off = float(np.linalg.norm(A - np.diag(np.diag(A))))
        logger.debug("Jacobi sweep %i: off-diagonal norm %.3e", sweeps, off)
        if off <= tol * scale:
            break
    else:
        logger.warning("Jacobi rotations did not converge in %i sweeps.", max_sweeps)

    eigenvalues = np.diag(A)[:size]
    V = V[:size, :size]
    order = np.argsort(eigenvalues)
    return eigenvalues[order], V[:, order], sweeps


def full_spectrum(op: DenseOperator, mass: DenseOperator) -> Spectrum:
    """Complete generalized spectrum of ``op`` with respect to ``mass``.

    Raises
    ------
    NotPositiveDefiniteError
        When ``mass`` has no Cholesky factorization.
    """
    A = (op.matrix + op.matrix.T) / 2
    B = (mass.matrix + mass.matrix.T) / 2
    try:
        L = scipy.linalg.cholesky(B, lower=True)
    except np.linalg.LinAlgError as ex:
        raise NotPositiveDefiniteError(f"The mass matrix is not positive definite: {ex}") from ex
    C = scipy.linalg.solve_triangular(L, scipy.linalg.solve_triangular(L, A, lower=True).T, lower=True)
    eigenvalues, Y, sweeps = jacobi_eigh(C)
    X = scipy.linalg.solve_triangular(L.T, Y, lower=False)
    residuals = np.linalg.norm(A @ X - (B @ X) * eigenvalues, axis=0) / (float(np.linalg.norm(A)) or 1.0)
    orthonormality_error = 0.0
    if len(eigenvalues):
        orthonormality_error = float(np.max(np.abs(X.T @ B @ X - np.eye(len(eigenvalues)))))
    return Spectrum(eigenvalues, X, residuals, orthonormality_error, sweeps)


def kernel_dimension(eigenvalues: np.ndarray, rel_tol: float = 1e-10) -> int:
    """Number of eigenvalues below ``rel_tol`` times the largest one."""
    eigenvalues = np.asarray(eigenvalues)
    if eigenvalues.size == 0:
        return 0
    return int(np.count_nonzero(eigenvalues < rel_tol * np.max(eigenvalues)))


def oracle_lambda_min(problem: AdmissibleClass) -> float:
    """Smallest generalized eigenvalue of an admissible class from the dense spectrum."""
    stiffness, mass = assemble_problem(problem)
    return float(full_spectrum(stiffness, mass).eigenvalues[0])
