"""Admissible classes: the constrained linear spaces of discrete fields over which quotients are extremized.

Every class works on flat coordinate vectors ``x`` and provides
- the Euclidean orthogonal projector onto the constrained subspace,
- the left- and right-hand side functionals of its inequality with their gradients (any ``p``),
- the two quadratic-form operators of the ``p = 2`` eigenproblem (``stiffness`` for the squared
  right-hand side terms, ``mass`` for the squared left-hand side),
- starting fields and matrix-field snapshots of a coordinate vector.
"""
import abc
import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.optimize

from kornlab.calculus import algebra, operators, traces
from kornlab.calculus.domain import Face, GridDomain, lp_norm, lp_norm_gradient, validate_exponent
from kornlab.calculus.exceptions import DimensionMismatchError
from kornlab.estimation.exceptions import EmptySubspaceError

__all__ = (
    "AdmissibleClass",
    "best_skew_approximation",
    "MatrixFields",
    "QuotientFields",
    "ScalarVanishingFields",
    "TangentialGradients",
    "VanishingSkewFields",
)

logger = logging.getLogger(__name__)

Evaluation = Tuple[float, np.ndarray]


def _expand(w: np.ndarray, trailing: int) -> np.ndarray:
    return w.reshape(w.shape + (1,) * trailing)


def _labels(faces: Sequence[Face]) -> str:
    return ",".join(f.label for f in faces)


def best_skew_approximation(grid: GridDomain, P: np.ndarray, p: float, *, method: str = "auto") -> np.ndarray:
    """The constant skew matrix closest to ``P`` in the discrete ``L^p`` norm.

    Parameters
    ----------
    grid : GridDomain
        The grid carrying the field.
    P : array-like
        Matrix field of shape ``(*grid.shape, n, n)``.
    p : float
        Exponent with 1 < p < ∞.
    method : str
        ``"closed_form"`` (p = 2 only: the weighted mean of ``skew P``), ``"bfgs"`` (convex descent
        on ``Σ_x w_x ‖P(x) - A‖^p``) or ``"auto"`` to pick the closed form whenever ``p = 2``.

    Returns
    -------
    packed : ndarray
        Packed components of the minimizer ``A*``.
    """
    p = validate_exponent(p)
    n = grid.dim
    P = np.asarray(P, dtype=float)
    if P.shape != grid.shape + (n, n):
        raise DimensionMismatchError("matrix field", grid.shape + (n, n), P.shape)
    if method not in ("auto", "closed_form", "bfgs"):
        raise ValueError(f"Unknown method '{method}'. Use 'auto', 'closed_form' or 'bfgs'.")
    w = grid.weights
    mean = algebra.pack_skew(np.tensordot(w, algebra.skew(P), axes=w.ndim) / np.sum(w))
    if method == "closed_form" or (method == "auto" and p == 2):
        if p != 2:
            raise ValueError(f"The closed form needs p=2, got p={p}.")
        return mean

    scale = float(np.max(np.abs(P)))
    if scale == 0:
        return np.zeros(algebra.packed_size(n))
    normalized = P / scale
    iu, ju = algebra.skew_pairs(n)
    grid_axes = tuple(range(n))

    def objective(a: np.ndarray) -> Evaluation:
        R = normalized - algebra.unpack_skew(a, n)
        r = np.sqrt(np.sum(R**2, axis=(-2, -1)))
        value = float(np.sum(w * r**p))
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(r > 0, p * w * r ** (p - 2), 0.0)
        G = np.sum(_expand(factor, 2) * R, axis=grid_axes)
        return value, -(G[iu, ju] - G[ju, iu])

    result = scipy.optimize.minimize(
        objective, mean / scale, jac=True, method="BFGS", options={"gtol": 1e-12, "maxiter": 1000}
    )
    if not result.success:
        logger.debug("Inner skew minimization stopped after %i iterations: %s", result.nit, result.message)
    return result.x * scale


class AdmissibleClass(abc.ABC):
    """Base class of the constrained field spaces."""

    rhs_terms: int = 1
    """Number of norms summed on the right-hand side."""

    def __init__(self, grid: GridDomain) -> None:
        self.grid = grid
        super().__init__()

    @property
    @abc.abstractmethod
    def name(self) -> str:
        """Human readable description."""

    @property
    @abc.abstractmethod
    def size(self) -> int:
        """Length of coordinate vectors."""

    @property
    def dimension(self) -> int:
        """Dimension of the constrained subspace."""
        return int(np.count_nonzero(self.project(np.ones(self.size))))

    def project(self, x: np.ndarray) -> np.ndarray:
        """Euclidean orthogonal projection onto the constrained subspace."""
        return np.array(x, dtype=float)

    @abc.abstractmethod
    def lhs(self, x: np.ndarray, p: float) -> Evaluation:
        """Left-hand side norm and its gradient."""

    @abc.abstractmethod
    def rhs(self, x: np.ndarray, p: float) -> Evaluation:
        """Right-hand side (sum of norms) and its gradient."""

    @abc.abstractmethod
    def stiffness(self, x: np.ndarray) -> np.ndarray:
        """Operator of the quadratic form: sum of the squared ``L^2`` right-hand side norms."""

    @abc.abstractmethod
    def mass(self, x: np.ndarray) -> np.ndarray:
        """Operator of the quadratic form: squared ``L^2`` left-hand side."""

    def mass_diagonal(self) -> Optional[np.ndarray]:
        """Diagonal of `mass`, if it is a diagonal operator."""
        return None

    @abc.abstractmethod
    def snapshot(self, x: np.ndarray) -> np.ndarray:
        """The field represented by ``x`` as a matrix field."""

    @abc.abstractmethod
    def _start_from_profile(self, profile: np.ndarray, axis: int) -> np.ndarray:
        """Coordinates of a starting field built from a scalar coordinate profile."""

    def _profiles(self) -> List[np.ndarray]:
        coordinates = self.grid.coordinates
        return [
            (coordinates[..., d] - extent / 2) / extent for d, extent in enumerate(self.grid.extents)
        ]

    def structured_starts(self) -> List[np.ndarray]:
        """Projected coordinate-field starts; starts that project to zero are dropped."""
        starts = []
        for axis, profile in enumerate(self._profiles()):
            x = self.project(self._start_from_profile(profile, axis))
            if np.any(x):
                starts.append(x)
        return starts

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        return self.project(rng.standard_normal(self.size))

    def check_nonempty(self) -> None:
        if self.dimension == 0:
            raise EmptySubspaceError(self.name)

    def ratio(self, x: np.ndarray, p: float) -> float:
        """The homogeneous quotient ``lhs / rhs``."""
        return self.lhs(x, p)[0] / self.rhs(x, p)[0]

    def ratio_and_gradient(self, x: np.ndarray, p: float) -> Tuple[float, float, float, np.ndarray]:
        """Returns ``(R, lhs, rhs, ∇R)`` with ``∇R = (∇lhs - R ∇rhs) / rhs``."""
        left, left_gradient = self.lhs(x, p)
        right, right_gradient = self.rhs(x, p)
        if right == 0:
            return np.inf, left, right, np.zeros_like(left_gradient)
        value = left / right
        return value, left, right, (left_gradient - value * right_gradient) / right


class MatrixFields(AdmissibleClass):
    """Matrix fields, optionally with zero tangential trace on a face set ``gamma``.

    Left-hand side ``‖P‖``, right-hand side ``‖sym P‖ + ‖Curl P‖``. Without ``gamma`` the class
    contains the constant skew fields, on which the right-hand side vanishes.
    """

    rhs_terms = 2

    def __init__(self, grid: GridDomain, gamma: Optional[Union[str, Sequence]] = None) -> None:
        super().__init__(grid)
        self.gamma = None if gamma is None else traces.resolve_gamma(grid, gamma)
        n = grid.dim
        self._shape = grid.shape + (n, n)

    @property
    def name(self) -> str:
        if self.gamma is None:
            return "matrix fields"
        return f"matrix fields with zero tangential trace on {_labels(self.gamma)}"

    @property
    def size(self) -> int:
        return int(np.prod(self._shape))

    def field(self, x: np.ndarray) -> np.ndarray:
        return np.reshape(x, self._shape)

    def project(self, x: np.ndarray) -> np.ndarray:
        if self.gamma is None:
            return np.array(x, dtype=float)
        return traces.project_tangential_zero(self.grid, self.field(x), self.gamma).ravel()

    def lhs(self, x: np.ndarray, p: float) -> Evaluation:
        P = self.field(x)
        w = self.grid.weights
        return lp_norm(P, p, w), lp_norm_gradient(P, p, w).ravel()

    def rhs(self, x: np.ndarray, p: float) -> Evaluation:
        P = self.field(x)
        w = self.grid.weights
        S = algebra.sym(P)
        C = operators.curl_matrix(self.grid, P)
        value = lp_norm(S, p, w) + lp_norm(C, p, w, skew_packed=True)
        gradient = algebra.sym(lp_norm_gradient(S, p, w)) + operators.curl_matrix_adjoint(
            self.grid, lp_norm_gradient(C, p, w, skew_packed=True)
        )
        return value, gradient.ravel()

    def sym_form(self, x: np.ndarray) -> np.ndarray:
        """Operator of ``‖sym P‖²``."""
        P = self.field(x)
        return (_expand(self.grid.weights, 2) * algebra.sym(P)).ravel()

    def curl_form(self, x: np.ndarray) -> np.ndarray:
        """Operator of ``‖Curl P‖²``."""
        C = operators.curl_matrix(self.grid, self.field(x))
        return operators.curl_matrix_adjoint(self.grid, 2 * _expand(self.grid.weights, 2) * C).ravel()

    def stiffness(self, x: np.ndarray) -> np.ndarray:
        return self.sym_form(x) + self.curl_form(x)

    def mass(self, x: np.ndarray) -> np.ndarray:
        return (_expand(self.grid.weights, 2) * self.field(x)).ravel()

    def mass_diagonal(self) -> np.ndarray:
        return np.broadcast_to(_expand(self.grid.weights, 2), self._shape).ravel()

    def snapshot(self, x: np.ndarray) -> np.ndarray:
        return np.array(self.field(x))

    def _start_from_profile(self, profile: np.ndarray, axis: int) -> np.ndarray:
        n = self.grid.dim
        A = algebra.unpack_skew(np.ones(algebra.packed_size(n)), n)
        return (_expand(profile, 2) * A).ravel()


class QuotientFields(MatrixFields):
    """Matrix fields modulo constant skew fields.

    Coordinates are kept Euclidean-orthogonal to the constant skew fields. The left-hand side is
    ``inf_A ‖P - A‖`` over constant skew ``A``; both sides are invariant under adding such ``A``.
    """

    def __init__(self, grid: GridDomain) -> None:
        super().__init__(grid, gamma=None)

    @property
    def name(self) -> str:
        return "matrix fields modulo constant skew fields"

    @property
    def dimension(self) -> int:
        return self.size - algebra.packed_size(self.grid.dim)

    def project(self, x: np.ndarray) -> np.ndarray:
        P = self.field(x)
        mean = np.mean(algebra.skew(P), axis=tuple(range(self.grid.dim)))
        return (P - mean).ravel()

    def lhs(self, x: np.ndarray, p: float) -> Evaluation:
        P = self.field(x)
        w = self.grid.weights
        A = algebra.unpack_skew(best_skew_approximation(self.grid, P, p), self.grid.dim)
        # envelope theorem: the minimizer does not move the gradient
        residual = P - A
        return lp_norm(residual, p, w), lp_norm_gradient(residual, p, w).ravel()

    def mass(self, x: np.ndarray) -> np.ndarray:
        P = self.field(x)
        A = algebra.unpack_skew(best_skew_approximation(self.grid, P, 2, method="closed_form"), self.grid.dim)
        return (_expand(self.grid.weights, 2) * (P - A)).ravel()

    def mass_diagonal(self) -> None:
        return None


class TangentialGradients(AdmissibleClass):
    """Gradients ``Du`` of vector fields whose tangential trace vanishes on ``gamma``.

    Coordinates ``y`` map to ``u = Z y`` where the orthonormal columns of ``Z`` span the vector
    fields satisfying the trace constraint, with the constant fields removed.
    Left-hand side ``‖Du‖``, right-hand side ``‖sym Du‖``.
    """

    _column_batch = 256

    def __init__(self, grid: GridDomain, gamma: Union[str, Sequence]) -> None:
        super().__init__(grid)
        self.gamma = traces.resolve_gamma(grid, gamma)
        self.basis = self._constrained_basis()
        logger.debug(
            "Constrained %s to %i of %i dimensions.", self.name, self.size, grid.node_count * grid.dim
        )

    @property
    def name(self) -> str:
        return f"gradients with zero tangential trace on {_labels(self.gamma)}"

    @property
    def size(self) -> int:
        return int(self.basis.shape[1])

    @property
    def dimension(self) -> int:
        return self.size

    def _trace_map(self) -> np.ndarray:
        """Matrix of ``u ↦`` the entries of ``Du`` removed by the zero-trace projection."""
        grid = self.grid
        n = grid.dim
        total = grid.node_count * n
        removed = traces.project_tangential_zero(grid, np.ones(grid.shape + (n, n)), self.gamma) == 0
        blocks = []
        for start in range(0, total, self._column_batch):
            stop = min(start + self._column_batch, total)
            U = np.zeros((total, stop - start))
            U[np.arange(start, stop), np.arange(stop - start)] = 1
            # (*shape, n, batch, n) → (*shape, n, n, batch)
            G = np.moveaxis(operators.gradient(grid, U.reshape(grid.shape + (n, stop - start))), -2, -1)
            blocks.append(G[removed])
        return np.hstack(blocks)

    def _constrained_basis(self) -> np.ndarray:
        n = self.grid.dim
        Z = scipy.linalg.null_space(self._trace_map())
        constants = np.tile(np.eye(n), (self.grid.node_count, 1))
        return Z @ scipy.linalg.null_space(constants.T @ Z)

    def velocity(self, y: np.ndarray) -> np.ndarray:
        """The vector field ``u = Z y``."""
        return (self.basis @ y).reshape(self.grid.shape + (self.grid.dim,))

    def _pull_back(self, G: np.ndarray) -> np.ndarray:
        return self.basis.T @ operators.gradient_adjoint(self.grid, G).ravel()

    def lhs(self, y: np.ndarray, p: float) -> Evaluation:
        G = operators.grad_vector(self.grid, self.velocity(y))
        w = self.grid.weights
        return lp_norm(G, p, w), self._pull_back(lp_norm_gradient(G, p, w))

    def rhs(self, y: np.ndarray, p: float) -> Evaluation:
        S = algebra.sym(operators.grad_vector(self.grid, self.velocity(y)))
        w = self.grid.weights
        return lp_norm(S, p, w), self._pull_back(algebra.sym(lp_norm_gradient(S, p, w)))

    def stiffness(self, y: np.ndarray) -> np.ndarray:
        G = operators.grad_vector(self.grid, self.velocity(y))
        return self._pull_back(_expand(self.grid.weights, 2) * algebra.sym(G))

    def mass(self, y: np.ndarray) -> np.ndarray:
        G = operators.grad_vector(self.grid, self.velocity(y))
        return self._pull_back(_expand(self.grid.weights, 2) * G)

    def snapshot(self, y: np.ndarray) -> np.ndarray:
        return operators.grad_vector(self.grid, self.velocity(y))

    def structured_starts(self) -> List[np.ndarray]:
        starts = super().structured_starts()
        # in 2d both planes give the same rotation
        return starts[:1] if self.grid.dim == 2 else starts

    def _start_from_profile(self, profile: np.ndarray, axis: int) -> np.ndarray:
        # infinitesimal rotation in the plane (axis, axis + 1)
        n = self.grid.dim
        other = (axis + 1) % n
        profiles = self._profiles()
        u = np.zeros(self.grid.shape + (n,))
        u[..., other] = profile
        u[..., axis] = -profiles[other]
        return self.basis.T @ u.ravel()


class VanishingSkewFields(AdmissibleClass):
    """Packed skew fields vanishing at every node of ``gamma``.

    Left-hand side ``‖A‖``, right-hand side ``‖Curl A‖``.
    """

    def __init__(self, grid: GridDomain, gamma: Union[str, Sequence]) -> None:
        super().__init__(grid)
        self.gamma = traces.resolve_gamma(grid, gamma)
        self._mask = traces.gamma_node_mask(grid, self.gamma)
        self._shape = grid.shape + (algebra.packed_size(grid.dim),)

    @property
    def name(self) -> str:
        return f"skew fields vanishing on {_labels(self.gamma)}"

    @property
    def size(self) -> int:
        return int(np.prod(self._shape))

    def field(self, x: np.ndarray) -> np.ndarray:
        return np.reshape(x, self._shape)

    def project(self, x: np.ndarray) -> np.ndarray:
        a = np.array(self.field(x), dtype=float)
        a[self._mask] = 0
        return a.ravel()

    def _curl(self, a: np.ndarray) -> np.ndarray:
        return operators.curl_matrix(self.grid, algebra.unpack_skew(a, self.grid.dim))

    def _curl_adjoint(self, C: np.ndarray) -> np.ndarray:
        G = operators.curl_matrix_adjoint(self.grid, C)
        iu, ju = algebra.skew_pairs(self.grid.dim)
        return (G[..., iu, ju] - G[..., ju, iu]).ravel()

    def lhs(self, x: np.ndarray, p: float) -> Evaluation:
        a = self.field(x)
        w = self.grid.weights
        return lp_norm(a, p, w, skew_packed=True), lp_norm_gradient(a, p, w, skew_packed=True).ravel()

    def rhs(self, x: np.ndarray, p: float) -> Evaluation:
        C = self._curl(self.field(x))
        w = self.grid.weights
        gradient = self._curl_adjoint(lp_norm_gradient(C, p, w, skew_packed=True))
        return lp_norm(C, p, w, skew_packed=True), gradient

    def stiffness(self, x: np.ndarray) -> np.ndarray:
        C = self._curl(self.field(x))
        return self._curl_adjoint(2 * _expand(self.grid.weights, 2) * C)

    def mass(self, x: np.ndarray) -> np.ndarray:
        return (2 * _expand(self.grid.weights, 1) * self.field(x)).ravel()

    def mass_diagonal(self) -> np.ndarray:
        return np.broadcast_to(2 * _expand(self.grid.weights, 1), self._shape).ravel()

    def snapshot(self, x: np.ndarray) -> np.ndarray:
        return algebra.unpack_skew(self.field(x), self.grid.dim)

    def _start_from_profile(self, profile: np.ndarray, axis: int) -> np.ndarray:
        return (_expand(profile, 1) * np.ones(self._shape[-1])).ravel()


class ScalarVanishingFields(AdmissibleClass):
    """Scalar fields vanishing at every node of ``gamma``; left ``‖f‖``, right ``‖∇f‖``."""

    def __init__(self, grid: GridDomain, gamma: Union[str, Sequence]) -> None:
        super().__init__(grid)
        self.gamma = traces.resolve_gamma(grid, gamma)
        self._mask = traces.gamma_node_mask(grid, self.gamma)

    @property
    def name(self) -> str:
        return f"scalar fields vanishing on {_labels(self.gamma)}"

    @property
    def size(self) -> int:
        return self.grid.node_count

    def field(self, x: np.ndarray) -> np.ndarray:
        return np.reshape(x, self.grid.shape)

    def project(self, x: np.ndarray) -> np.ndarray:
        f = np.array(self.field(x), dtype=float)
        f[self._mask] = 0
        return f.ravel()

    def lhs(self, x: np.ndarray, p: float) -> Evaluation:
        f = self.field(x)
        w = self.grid.weights
        return lp_norm(f, p, w), lp_norm_gradient(f, p, w).ravel()

    def rhs(self, x: np.ndarray, p: float) -> Evaluation:
        g = operators.grad_scalar(self.grid, self.field(x))
        w = self.grid.weights
        return lp_norm(g, p, w), operators.gradient_adjoint(self.grid, lp_norm_gradient(g, p, w)).ravel()

    def stiffness(self, x: np.ndarray) -> np.ndarray:
        g = operators.grad_scalar(self.grid, self.field(x))
        return operators.gradient_adjoint(self.grid, _expand(self.grid.weights, 1) * g).ravel()

    def mass(self, x: np.ndarray) -> np.ndarray:
        return (self.grid.weights * self.field(x)).ravel()

    def mass_diagonal(self) -> np.ndarray:
        return self.grid.weights.ravel()

    def snapshot(self, x: np.ndarray) -> np.ndarray:
        return np.array(self.field(x))[..., np.newaxis, np.newaxis]

    def _start_from_profile(self, profile: np.ndarray, axis: int) -> np.ndarray:
        return profile.ravel()
