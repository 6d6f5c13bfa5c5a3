"""Matrix-free finite differences for grad, curl, Curl and Div on box grids.

Every partial derivative applies a 1-d second-order difference matrix along one grid axis:
central differences at interior nodes and 3-point one-sided differences at the two end nodes.
Derivatives along distinct axes therefore commute exactly, so ``curl_matrix(grad_vector(v))``
vanishes up to roundoff at every node.

Field layout: the grid shape comes first, followed by the value axes. A vector field has shape
``(*grid.shape, n)``, a matrix field ``(*grid.shape, n, n)``, a Curl field ``(*grid.shape, n, M)``.
"""
import functools
import logging
from typing import Tuple

import numpy as np

from kornlab.calculus import algebra
from kornlab.calculus.domain import GridDomain
from kornlab.calculus.exceptions import DimensionMismatchError

__all__ = (
    "classical_curl",
    "curl_matrix",
    "curl_matrix_adjoint",
    "curl_vector",
    "derivative_matrix",
    "div_matrix",
    "grad_scalar",
    "grad_skew_from_curl",
    "grad_vector",
    "gradient",
    "gradient_adjoint",
    "partial",
    "partial_adjoint",
    "skew_gradient_ratio",
)

logger = logging.getLogger(__name__)


@functools.lru_cache(maxsize=64)
def derivative_matrix(points: int, spacing: float) -> np.ndarray:
    """1-d second-order first-derivative matrix on ``points`` equidistant nodes.

    Parameters
    ----------
    points : int
        Number of nodes (at least 3).
    spacing : float
        Node distance.

    Returns
    -------
    D : ndarray
        Read-only ``(points, points)`` matrix.
    """
    if points < 3:
        raise ValueError(f"Second-order stencils need at least 3 points, got {points}.")
    D = np.zeros((points, points))
    for i in range(1, points - 1):
        D[i, i - 1] = -0.5
        D[i, i + 1] = 0.5
    D[0, :3] = [-1.5, 2.0, -0.5]
    D[-1, -3:] = [0.5, -2.0, 1.5]
    D /= spacing
    D.setflags(write=False)
    return D


def _check_field(grid: GridDomain, field: np.ndarray, value_shape: Tuple[int, ...], what: str) -> np.ndarray:
    field = np.asarray(field, dtype=float)
    expected = grid.shape + value_shape
    if field.shape != expected:
        raise DimensionMismatchError(what, expected, field.shape)
    return field


def _apply_along(matrix: np.ndarray, arr: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(matrix, arr, axes=(1, axis)), 0, axis)


def partial(grid: GridDomain, arr: np.ndarray, axis: int) -> np.ndarray:
    """Discrete ``∂_axis`` of any nodal field (value axes trail the grid axes)."""
    D = derivative_matrix(grid.points_per_axis[axis], grid.spacing[axis])
    return _apply_along(D, np.asarray(arr, dtype=float), axis)


def partial_adjoint(grid: GridDomain, arr: np.ndarray, axis: int) -> np.ndarray:
    """Euclidean adjoint of `partial`."""
    D = derivative_matrix(grid.points_per_axis[axis], grid.spacing[axis])
    return _apply_along(D.T, np.asarray(arr, dtype=float), axis)


def gradient(grid: GridDomain, arr: np.ndarray) -> np.ndarray:
    """All partial derivatives of a nodal field, stacked on a new trailing axis."""
    return np.stack([partial(grid, arr, d) for d in range(grid.dim)], axis=-1)


def gradient_adjoint(grid: GridDomain, arr: np.ndarray) -> np.ndarray:
    """Euclidean adjoint of `gradient`."""
    arr = np.asarray(arr, dtype=float)
    return sum(partial_adjoint(grid, arr[..., d], d) for d in range(grid.dim))


def grad_scalar(grid: GridDomain, f: np.ndarray) -> np.ndarray:
    """Gradient ``∇f`` of a scalar field, shape ``(*shape, n)``."""
    f = _check_field(grid, f, (), "scalar field")
    return gradient(grid, f)


def grad_vector(grid: GridDomain, v: np.ndarray) -> np.ndarray:
    """Jacobian ``(Dv)_kj = ∂_j v_k`` of a vector field.

    Parameters
    ----------
    grid : GridDomain
        The grid carrying the field.
    v : array-like
        Vector field of shape ``(*grid.shape, n)``.

    Returns
    -------
    Dv : ndarray
        Matrix field of shape ``(*grid.shape, n, n)``.
    """
    v = _check_field(grid, v, (grid.dim,), "vector field")
    return gradient(grid, v)


def curl_vector(grid: GridDomain, v: np.ndarray) -> np.ndarray:
    """Generalized curl ``v ⨯ (-∇) = -2 skew(Dv)`` in packed storage."""
    Dv = grad_vector(grid, v)
    return algebra.pack_skew(-2 * algebra.skew(Dv))


def curl_matrix(grid: GridDomain, P: np.ndarray) -> np.ndarray:
    """Generalized Curl ``(Curl P)_ijk = ∂_i P_kj - ∂_j P_ki``.

    Parameters
    ----------
    grid : GridDomain
        The grid carrying the field.
    P : array-like
        Matrix field of shape ``(*grid.shape, n, n)``.

    Returns
    -------
    C : ndarray
        Shape ``(*grid.shape, n, M)``; block ``k`` is the generalized curl of row ``k``.
    """
    n = grid.dim
    P = _check_field(grid, P, (n, n), "matrix field")
    dP = gradient(grid, P)
    iu, ju = algebra.skew_pairs(n)
    # dP[..., k, j, i] = ∂_i P_kj
    return dP[..., ju, iu] - dP[..., iu, ju]


def curl_matrix_adjoint(grid: GridDomain, C: np.ndarray) -> np.ndarray:
    """Euclidean adjoint of `curl_matrix` with respect to packed storage."""
    n = grid.dim
    C = _check_field(grid, C, (n, algebra.packed_size(n)), "Curl field")
    iu, ju = algebra.skew_pairs(n)
    G = np.zeros(grid.shape + (n, n, n))
    G[..., ju, iu] = C
    G[..., iu, ju] = -C
    return gradient_adjoint(grid, G)


def div_matrix(grid: GridDomain, P: np.ndarray) -> np.ndarray:
    """Row-wise divergence ``(Div P)_k = Σ_j ∂_j P_kj``."""
    n = grid.dim
    P = _check_field(grid, P, (n, n), "matrix field")
    return sum(partial(grid, P[..., :, j], j) for j in range(n))


def grad_skew_from_curl(C: np.ndarray) -> np.ndarray:
    """Reconstructs all first derivatives of a skew field ``A`` from ``C = Curl A``.

    Uses ``(∂_k A)_ij = -(C_kij - C_kji + C_jik) / 2``, which is pointwise algebra and needs no grid.

    Parameters
    ----------
    C : array-like
        Curl of a skew-valued field, shape ``(..., n, M)``.

    Returns
    -------
    dA : ndarray
        Shape ``(..., n, M)``; entry ``[..., k, :]`` holds the packed ``∂_k A``.
    """
    F = algebra.unpack_cross(C)
    n = F.shape[-1]
    iu, ju = algebra.skew_pairs(n)
    combination = F[..., :, iu, ju] - F[..., :, ju, iu] + np.moveaxis(F[..., ju, iu, :], -1, -2)
    return -0.5 * combination


def skew_gradient_ratio(grid: GridDomain, A: np.ndarray) -> float:
    """Largest nodal ratio ``|∂A| / |Curl A|`` of a packed skew field.

    The linear-combination identity bounds this by 3/2 at every node. Nodes where both sides
    vanish are skipped.
    """
    n = grid.dim
    A = _check_field(grid, A, (algebra.packed_size(n),), "packed skew field")
    full = algebra.unpack_skew(A, n)
    dA = gradient(grid, full)
    C = curl_matrix(grid, full)
    numerator = np.sqrt(np.sum(dA**2, axis=(-3, -2, -1)))
    denominator = algebra.cross_norm(C)
    scale = max(float(np.max(numerator)), 1.0)
    active = denominator > 1e-12 * scale
    if np.any(numerator[~active] > 1e-10 * scale):
        logger.warning("Found nodes with a non-zero skew gradient but vanishing Curl.")
        return float("inf")
    if not np.any(active):
        return 0.0
    return float(np.max(numerator[active] / denominator[active]))


def classical_curl(grid: GridDomain, P: np.ndarray) -> np.ndarray:
    """Row-wise classical curl of a 3-d matrix field, shape ``(*shape, 3, 3)``.

    Row ``k`` equals ``∇ × (P^T e_k)`` and is computed as ``-axl`` of block ``k`` of `curl_matrix`.
    """
    if grid.dim != 3:
        raise ValueError(f"The classical curl needs n=3, got n={grid.dim}.")
    C = curl_matrix(grid, P)
    return -algebra.axl(algebra.unpack_skew(C, 3))
