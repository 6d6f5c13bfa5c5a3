"""Pointwise linear algebra for vectors, matrices, so(n) and the generalized cross products.

Elements of so(n) are stored packed: the n(n-1)/2 entries ``A[i, j]`` with ``i < j`` in
lexicographic order. Objects of type so(n) × R^n (for example ``P ⨯ b`` or the generalized Curl
of a matrix field) are stored as ``n`` packed blocks, block ``k`` on axis -2.

All functions broadcast over leading axes, so they can be applied node-wise to whole fields.
"""
import enum
from typing import Optional, Tuple

import numpy as np

from kornlab.calculus.exceptions import DegenerateInputError, DimensionMismatchError

__all__ = (
    "axl",
    "axl_cross_compat",
    "cross_entry",
    "cross_norm",
    "crucial_combination",
    "generalized_cross",
    "hat",
    "is_parallel",
    "matrix_cross",
    "pack_skew",
    "packed_norm",
    "packed_size",
    "recover_skew",
    "skew",
    "skew_pairs",
    "skew_rank_bound",
    "SkewRankVerdict",
    "sym",
    "unpack_cross",
    "unpack_skew",
)


class SkewRankVerdict(str, enum.Enum):
    """Outcome of the rank argument for skew matrices with rows parallel to a normal."""

    ZERO = "zero"
    NONZERO_VIOLATION = "nonzero_violation"


def packed_size(n: int) -> int:
    """Dimension n(n-1)/2 of so(n)."""
    return n * (n - 1) // 2


def skew_pairs(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row and column indices ``(i, j)``, ``i < j``, in packing order."""
    if n < 2:
        raise ValueError(f"Invalid dimension: {n}")
    return np.triu_indices(n, k=1)


def _dim_from_packed(m: int) -> int:
    n = int(round((1 + np.sqrt(1 + 8 * m)) / 2))
    if packed_size(n) != m:
        raise DimensionMismatchError("packed so(n) storage", "n(n-1)/2 components", m)
    return n


def pack_skew(A: np.ndarray) -> np.ndarray:
    """Packs the strictly upper triangle of (skew) matrices.

    Parameters
    ----------
    A : array-like
        Matrices of shape ``(..., n, n)``.

    Returns
    -------
    packed : ndarray
        Shape ``(..., n(n-1)/2)``, holding ``A[..., i, j]`` for ``i < j``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DimensionMismatchError("matrix argument", "(..., n, n)", A.shape)
    iu, ju = skew_pairs(A.shape[-1])
    return A[..., iu, ju]


def unpack_skew(a: np.ndarray, n: Optional[int] = None) -> np.ndarray:
    """Expands packed so(n) components to full skew-symmetric matrices.

    Parameters
    ----------
    a : array-like
        Packed components of shape ``(..., n(n-1)/2)``.
    n : int, optional
        Ambient dimension; inferred from the packed length if omitted.

    Returns
    -------
    A : ndarray
        Shape ``(..., n, n)`` with ``A[j, i] = -A[i, j]`` and zero diagonal.
    """
    a = np.asarray(a, dtype=float)
    if n is None:
        n = _dim_from_packed(a.shape[-1])
    elif a.shape[-1] != packed_size(n):
        raise DimensionMismatchError("packed so(n) storage", packed_size(n), a.shape[-1])
    iu, ju = skew_pairs(n)
    A = np.zeros(a.shape[:-1] + (n, n))
    A[..., iu, ju] = a
    A[..., ju, iu] = -a
    return A


def unpack_cross(T: np.ndarray) -> np.ndarray:
    """Expands a packed element of so(n) × R^n to the full third order array.

    The result satisfies ``full[..., i, j, k] = T_ijk`` where block ``k`` of ``T`` is skew in ``(i, j)``.
    """
    T = np.asarray(T, dtype=float)
    n = T.shape[-2]
    return np.moveaxis(unpack_skew(T, n), -3, -1)


def cross_entry(T: np.ndarray, i: int, j: int, k: int) -> np.ndarray:
    """Reads the entry ``T_ijk`` of a packed third order object."""
    n = np.shape(T)[-2]
    for index in (i, j, k):
        if not 0 <= index < n:
            raise IndexError(f"Index {index} out of range for dimension {n}.")
    return unpack_cross(T)[..., i, j, k]


def sym(P: np.ndarray) -> np.ndarray:
    """Symmetric part ``(P + P^T) / 2`` over the last two axes."""
    P = np.asarray(P, dtype=float)
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def skew(P: np.ndarray) -> np.ndarray:
    """Skew-symmetric part ``(P - P^T) / 2`` over the last two axes."""
    P = np.asarray(P, dtype=float)
    return 0.5 * (P - np.swapaxes(P, -1, -2))


def packed_norm(a: np.ndarray) -> np.ndarray:
    """Frobenius norm of the skew matrices represented by packed components."""
    return np.sqrt(2.0) * np.linalg.norm(np.asarray(a, dtype=float), axis=-1)


def cross_norm(T: np.ndarray) -> np.ndarray:
    """Frobenius norm of the full third order arrays represented by packed blocks."""
    T = np.asarray(T, dtype=float)
    return np.sqrt(2.0 * np.sum(T**2, axis=(-1, -2)))


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatchError("vector arguments", a.shape[-1], b.shape[-1])
    if a.shape[-1] < 2:
        raise DimensionMismatchError("vector arguments", "n >= 2", a.shape[-1])


def generalized_cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Generalized cross product ``a ⨯ b = a ⊗ b - b ⊗ a`` in packed storage.

    Parameters
    ----------
    a, b : array-like
        Vectors of equal dimension ``n``, shape ``(..., n)``.

    Returns
    -------
    packed : ndarray
        Shape ``(..., n(n-1)/2)`` with entries ``a_i b_j - a_j b_i`` for ``i < j``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same_dim(a, b)
    iu, ju = skew_pairs(a.shape[-1])
    return a[..., iu] * b[..., ju] - a[..., ju] * b[..., iu]


def axl(A: np.ndarray) -> np.ndarray:
    """Axial vector of so(3) matrices, fixed by ``A b = axl(A) × b``."""
    A = np.asarray(A, dtype=float)
    if A.shape[-2:] != (3, 3):
        raise ValueError(f"axl is only defined on so(3), got matrices of shape {A.shape[-2:]}.")
    return np.stack([A[..., 2, 1], A[..., 0, 2], A[..., 1, 0]], axis=-1)


def hat(w: np.ndarray) -> np.ndarray:
    """Inverse of `axl`: the so(3) matrix with ``hat(w) b = w × b``."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != 3:
        raise ValueError(f"hat is only defined for 3-vectors, got {w.shape[-1]} components.")
    return unpack_skew(np.stack([-w[..., 2], w[..., 1], -w[..., 0]], axis=-1), 3)


def axl_cross_compat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Classical cross product of 3-vectors, computed as ``-axl(a ⨯ b)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same_dim(a, b)
    if a.shape[-1] != 3:
        raise ValueError(f"The classical cross product needs n=3, got n={a.shape[-1]}.")
    return -axl(unpack_skew(generalized_cross(a, b), 3))


def matrix_cross(P: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise generalized cross product ``(P ⨯ b)_ijk = P_ki b_j - P_kj b_i``.

    Parameters
    ----------
    P : array-like
        Matrices of shape ``(..., n, n)``.
    b : array-like
        Vectors of shape ``(..., n)``.

    Returns
    -------
    T : ndarray
        Shape ``(..., n, n(n-1)/2)``; block ``k`` is ``generalized_cross(P[k, :], b)``.
    """
    P = np.asarray(P, dtype=float)
    b = np.asarray(b, dtype=float)
    if P.ndim < 2 or P.shape[-1] != P.shape[-2]:
        raise DimensionMismatchError("matrix argument", "(..., n, n)", P.shape)
    _check_same_dim(P, b)
    return generalized_cross(P, b[..., np.newaxis, :])


def crucial_combination(T: np.ndarray, i: int, j: int, k: int) -> np.ndarray:
    """Evaluates ``T_kij - T_kji + T_jik``.

    For ``T = A ⨯ b`` with skew ``A`` this equals ``2 A_ij b_k``.
    """
    full = unpack_cross(T)
    n = full.shape[-1]
    for index in (i, j, k):
        if not 0 <= index < n:
            raise IndexError(f"Index {index} out of range for dimension {n}.")
    return full[..., k, i, j] - full[..., k, j, i] + full[..., j, i, k]


def recover_skew(T: np.ndarray, b: np.ndarray, *, pivot: Optional[int] = None) -> np.ndarray:
    """Reconstructs the skew matrix ``A`` from ``T = A ⨯ b``.

    Parameters
    ----------
    T : array-like
        Packed third order object of shape ``(n, n(n-1)/2)``, assumed to be of the form ``A ⨯ b``.
    b : array-like
        The non-zero vector of the product.
    pivot : int, optional
        Component of ``b`` to divide by. Defaults to the largest-magnitude component.

    Returns
    -------
    packed : ndarray
        Packed components of ``A``.
    """
    T = np.asarray(T, dtype=float)
    b = np.asarray(b, dtype=float)
    n = b.shape[-1]
    if T.shape != (n, packed_size(n)):
        raise DimensionMismatchError("packed cross argument", (n, packed_size(n)), T.shape)
    if not np.any(b):
        raise DegenerateInputError("Cannot recover a skew matrix from A ⨯ b with b = 0.")
    k = int(np.argmax(np.abs(b))) if pivot is None else pivot
    if b[k] == 0:
        raise DegenerateInputError(f"Pivot component b[{k}] vanishes.")
    full = unpack_cross(T)
    iu, ju = skew_pairs(n)
    combination = full[k, iu, ju] - full[k, ju, iu] + full[ju, iu, k]
    return combination / (2 * b[k])


def is_parallel(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> bool:
    """Tests ``‖a ⨯ b‖ ≤ tol ‖a‖ ‖b‖``; zero vectors count as parallel."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same_dim(a, b)
    scale = np.linalg.norm(a) * np.linalg.norm(b)
    return bool(packed_norm(generalized_cross(a, b)) <= tol * scale)


def skew_rank_bound(A: np.ndarray, nu: np.ndarray, tol: float = 1e-12) -> SkewRankVerdict:
    """Applies the rank argument for a skew matrix whose rows should be parallel to ``nu``.

    Rows parallel to one vector give rank at most 1, and a skew matrix has even rank,
    so such a matrix vanishes.

    Parameters
    ----------
    A : array-like
        Packed components of a skew matrix.
    nu : array-like
        Non-zero (normal) vector.
    tol : float
        Relative parallelism tolerance.

    Returns
    -------
    verdict : SkewRankVerdict
        ``ZERO`` if every row is parallel to ``nu``, ``NONZERO_VIOLATION`` otherwise.
    """
    nu = np.asarray(nu, dtype=float)
    if not np.any(nu):
        raise DegenerateInputError("The normal vector must not vanish.")
    full = unpack_skew(A, nu.shape[-1])
    if all(is_parallel(row, nu, tol) for row in full):
        return SkewRankVerdict.ZERO
    return SkewRankVerdict.NONZERO_VIOLATION
