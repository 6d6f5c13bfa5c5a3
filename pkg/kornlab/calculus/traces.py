"""Generalized tangential traces ``P ⨯ ν`` and the zero-trace condition on face unions."""
import enum
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from kornlab.calculus import algebra, operators
from kornlab.calculus.domain import BoundaryFacet, Face, GridDomain, all_faces, parse_faces
from kornlab.calculus.exceptions import DimensionMismatchError, EmptyGammaError

__all__ = (
    "build_trace_constraints",
    "ConstraintKind",
    "gamma_node_mask",
    "GammaSpec",
    "ibp_residual",
    "ibp_terms",
    "project_tangential_zero",
    "resolve_gamma",
    "tangential_trace",
    "trace_equivalence_check",
    "trace_violation",
    "TraceConstraint",
)


GammaSpec = Union[str, Sequence[Union[str, Face]]]


class ConstraintKind(str, enum.Enum):
    """How the zero tangential trace restricts the rows of ``P`` at a node."""

    ROWS_PARALLEL_TO_NORMAL = "rows_parallel_to_normal"
    ROWS_ZERO = "rows_zero"


@dataclass(frozen=True)
class TraceConstraint:
    """The zero tangential trace condition at one boundary node on ``gamma``."""

    node_index: int
    """Flat index of the node, as in `GridDomain.multi_index`."""
    multi_index: Tuple[int, ...]
    constraint_kind: ConstraintKind
    active_normals: np.ndarray = field(repr=False)
    """Outward unit normals of the ``gamma`` faces through the node, one per row."""


def resolve_gamma(grid: GridDomain, gamma: GammaSpec) -> Tuple[Face, ...]:
    """Turns labels, ``"all"`` or `Face` objects into a sorted tuple of faces of ``grid``."""
    if isinstance(gamma, str):
        return parse_faces(gamma, grid.dim)
    items = list(gamma)
    if not items:
        raise EmptyGammaError()
    if all(isinstance(f, Face) for f in items):
        for f in items:
            if f.axis >= grid.dim:
                raise ValueError(f"Face {f.label} does not exist in {grid.dim} dimensions.")
        return tuple(sorted(set(items)))
    labels = [f.label if isinstance(f, Face) else str(f) for f in items]
    return parse_faces(labels, grid.dim)


def _active_counts(grid: GridDomain, faces: Sequence[Face]) -> np.ndarray:
    return np.sum([grid.face_mask(f) for f in faces], axis=0)


def gamma_node_mask(grid: GridDomain, gamma: GammaSpec) -> np.ndarray:
    """Boolean mask of all nodes lying on at least one face of ``gamma``."""
    return _active_counts(grid, resolve_gamma(grid, gamma)) > 0


def build_trace_constraints(grid: GridDomain, gamma: GammaSpec) -> List[TraceConstraint]:
    """Lists the nodal constraints of the zero tangential trace on ``gamma``.

    Nodes on exactly one ``gamma`` face keep rows parallel to its normal. Nodes on two or
    more ``gamma`` faces intersect those conditions, which leaves only zero rows.
    """
    faces = resolve_gamma(grid, gamma)
    n = grid.dim
    constraints = []
    for node in np.flatnonzero(_active_counts(grid, faces) > 0):
        multi_index = grid.multi_index(int(node))
        active = [f for f in faces if grid.face_mask(f)[multi_index]]
        kind = ConstraintKind.ROWS_PARALLEL_TO_NORMAL if len(active) == 1 else ConstraintKind.ROWS_ZERO
        constraints.append(
            TraceConstraint(
                node_index=int(node),
                multi_index=multi_index,
                constraint_kind=kind,
                active_normals=np.array([f.normal(n) for f in active]),
            )
        )
    return constraints


def _node_value(P: np.ndarray, facet: BoundaryFacet) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    n = len(facet.multi_index)
    if P.shape == (n, n):
        return P
    if P.shape[-2:] != (n, n) or P.ndim != n + 2:
        raise DimensionMismatchError("matrix field", f"(*shape, {n}, {n})", P.shape)
    return P[facet.multi_index]


def tangential_trace(
    P: np.ndarray, facet: BoundaryFacet, normal: Optional[np.ndarray] = None
) -> np.ndarray:
    """The generalized tangential trace ``P(x) ⨯ ν`` at a boundary node.

    Parameters
    ----------
    P : array-like
        Matrix field ``(*shape, n, n)`` or the single nodal matrix.
    facet : BoundaryFacet
        The boundary node.
    normal : array-like, optional
        Normal to use at edge or corner nodes, which carry several.

    Returns
    -------
    T : ndarray
        Packed third order object of shape ``(n, M)``.
    """
    nu = facet.outward_normal if normal is None else np.asarray(normal, dtype=float)
    return algebra.matrix_cross(_node_value(P, facet), nu)


def trace_equivalence_check(P: np.ndarray, facet: BoundaryFacet, tol: float = 1e-12) -> bool:
    """Tests that ``P ⨯ ν = 0`` and ``P τ_l = 0 for all l`` hold or fail together."""
    value = _node_value(P, facet)
    scale = max(float(np.linalg.norm(value)), 1.0)
    trace_vanishes = float(algebra.cross_norm(tangential_trace(value, facet))) <= tol * scale
    tangential_norms = np.linalg.norm(value @ facet.tangent_frame.T, axis=0)
    frame_vanishes = float(np.max(tangential_norms)) <= tol * scale
    return trace_vanishes == frame_vanishes


def project_tangential_zero(grid: GridDomain, P: np.ndarray, gamma: GammaSpec) -> np.ndarray:
    """Nodewise nearest matrix field with vanishing tangential trace on ``gamma``.

    Parameters
    ----------
    grid : GridDomain
        The grid carrying the field.
    P : array-like
        Matrix field of shape ``(*grid.shape, n, n)``.
    gamma : str or sequence
        Face labels, ``"all"`` or `Face` objects.

    Returns
    -------
    projected : ndarray
        A copy of ``P`` with ``row_k ← ⟨row_k, ν⟩ ν`` on single-face nodes of ``gamma``
        and zero rows on nodes shared by several ``gamma`` faces.
    """
    faces = resolve_gamma(grid, gamma)
    n = grid.dim
    P = np.array(P, dtype=float)
    if P.shape != grid.shape + (n, n):
        raise DimensionMismatchError("matrix field", grid.shape + (n, n), P.shape)
    counts = _active_counts(grid, faces)
    for face in faces:
        single = grid.face_mask(face) & (counts == 1)
        # with ν = ±e_axis only column `axis` survives
        for m in range(n):
            if m != face.axis:
                P[single, :, m] = 0.0
    P[counts >= 2] = 0.0
    return P


def trace_violation(grid: GridDomain, P: np.ndarray, gamma: GammaSpec) -> float:
    """Largest nodal ``‖P ⨯ ν‖`` over all ``gamma`` nodes and their active normals."""
    faces = resolve_gamma(grid, gamma)
    n = grid.dim
    P = np.asarray(P, dtype=float)
    worst = 0.0
    for face in faces:
        values = P[grid.face_mask(face)]
        norms = algebra.cross_norm(algebra.matrix_cross(values, face.normal(n)))
        worst = max(worst, float(np.max(norms)))
    return worst


def ibp_terms(grid: GridDomain, P: np.ndarray, Q: np.ndarray, k: int) -> Tuple[float, float, float]:
    """The three integrals of the integration by parts formula for row ``a = P^T e_k``.

    Returns
    -------
    boundary : float
        ``∮⟨a ⨯ ν, Q⟩ dS``, each face integrated with its own trapezoidal rule.
    curl_volume : float
        ``∫⟨curl a, Q⟩ dx``
    div_volume : float
        ``∫⟨a, Div skew Q⟩ dx``
    """
    n = grid.dim
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    for name, F in (("P", P), ("Q", Q)):
        if F.shape != grid.shape + (n, n):
            raise DimensionMismatchError(f"matrix field {name}", grid.shape + (n, n), F.shape)
    if not 0 <= k < n:
        raise IndexError(f"Row index {k} out of range for dimension {n}.")

    a = P[..., k, :]
    # ⟨X, Q⟩ = Σ_{i<j} X_ij (Q_ij - Q_ji) for skew X
    q_packed = algebra.pack_skew(Q - np.swapaxes(Q, -1, -2))

    boundary = 0.0
    for face in all_faces(n):
        integrand = np.sum(algebra.generalized_cross(a, face.normal(n)) * q_packed, axis=-1)
        boundary += float(np.sum(grid.face_weights(face) * integrand))

    curl_term = np.sum(operators.curl_vector(grid, a) * q_packed, axis=-1)
    div_term = np.sum(a * operators.div_matrix(grid, algebra.skew(Q)), axis=-1)
    return boundary, float(np.sum(grid.weights * curl_term)), float(np.sum(grid.weights * div_term))


def ibp_residual(grid: GridDomain, P: np.ndarray, Q: np.ndarray, k: int) -> float:
    """Quadrature residual of the integration-by-parts identity for ``a = P^T e_k``.

    ``|∮⟨a ⨯ ν, Q⟩ dS + ∫⟨curl a, Q⟩ dx - 2 ∫⟨a, Div skew Q⟩ dx|``
    """
    boundary, curl_volume, div_volume = ibp_terms(grid, P, Q, k)
    return abs(boundary + curl_volume - 2 * div_volume)
