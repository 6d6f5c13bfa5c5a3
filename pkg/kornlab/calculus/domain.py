"""Axis-aligned box grids with quadrature weights, boundary faces and discrete L^p norms."""
import enum
import functools
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from kornlab.calculus.exceptions import (
    EmptyGammaError,
    InvalidExponentError,
    InvalidGridError,
)

__all__ = (
    "all_faces",
    "BoundaryFacet",
    "build_grid",
    "classify_boundary",
    "Face",
    "FacetClass",
    "GridDomain",
    "lp_norm",
    "lp_norm_gradient",
    "parse_faces",
    "QuadratureWeights",
    "validate_exponent",
)


_FACE_MATCHER = re.compile(r"^([+\-−])x(\d+)$")
"""Compiled RegEx for face labels like ``+x1`` or ``−x2``."""


@dataclass(frozen=True, order=True)
class Face:
    """One of the ``2n`` faces of a box: ``x_axis = min`` (side -1) or ``x_axis = max`` (side +1)."""

    axis: int
    side: int

    def __post_init__(self) -> None:
        if self.side not in (-1, 1):
            raise ValueError(f"Invalid face side: {self.side}")
        if self.axis < 0:
            raise ValueError(f"Invalid face axis: {self.axis}")

    @property
    def label(self) -> str:
        """1-based label, e.g. ``+x1`` or ``-x2``."""
        return f"{'+' if self.side > 0 else '-'}x{self.axis + 1}"

    def normal(self, dim: int) -> np.ndarray:
        """Outward unit normal ``±e_axis``."""
        nu = np.zeros(dim)
        nu[self.axis] = self.side
        return nu


def all_faces(dim: int) -> Tuple[Face, ...]:
    """All faces of a ``dim``-dimensional box, ordered ``-x1, +x1, -x2, …``."""
    return tuple(Face(axis, side) for axis in range(dim) for side in (-1, 1))


def parse_faces(spec: Union[str, Sequence[str]], dim: int) -> Tuple[Face, ...]:
    """Parses a face set specification.

    Parameters
    ----------
    spec : str or sequence of str
        ``"all"`` or comma separated labels like ``"+x1,-x2"`` (ASCII or Unicode minus).
    dim : int
        Ambient dimension.

    Returns
    -------
    faces : tuple of Face
        Sorted, de-duplicated faces.
    """
    if isinstance(spec, str):
        labels = [s.strip() for s in spec.split(",") if s.strip()]
    else:
        labels = [str(s).strip() for s in spec]
    if not labels:
        raise EmptyGammaError()
    if any(label.lower() == "all" for label in labels):
        return all_faces(dim)
    faces = set()
    for label in labels:
        m = _FACE_MATCHER.match(label)
        if m is None:
            raise ValueError(f"This is not a face label: '{label}'. Use e.g. '+x1' or '-x2'.")
        axis = int(m.group(2)) - 1
        if not 0 <= axis < dim:
            raise ValueError(f"Face '{label}' does not exist in {dim} dimensions.")
        faces.add(Face(axis, 1 if m.group(1) == "+" else -1))
    return tuple(sorted(faces))


class FacetClass(str, enum.Enum):
    """Boundary node classes."""

    FACE = "face"
    EDGE_OR_CORNER = "edge_or_corner"


@dataclass(frozen=True)
class BoundaryFacet:
    """A boundary node with its adjacent faces, normals and (for face nodes) tangent frame."""

    node_index: int
    multi_index: Tuple[int, ...]
    faces: Tuple[Face, ...]
    normals: np.ndarray = field(repr=False)
    tangent_frame: np.ndarray = field(repr=False)

    @property
    def facet_class(self) -> FacetClass:
        return FacetClass.FACE if len(self.faces) == 1 else FacetClass.EDGE_OR_CORNER

    @property
    def outward_normal(self) -> np.ndarray:
        """The unit normal of a face-class node."""
        if self.facet_class != FacetClass.FACE:
            raise ValueError(
                f"Node {self.node_index} lies on {len(self.faces)} faces and has no unique normal."
            )
        return self.normals[0]


@dataclass(frozen=True)
class QuadratureWeights:
    """Nodal trapezoidal volume weights and summed boundary weights."""

    volume: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)


class GridDomain:
    """Uniform, node-centered discretization of an axis-aligned box ``[0, L_1] × … × [0, L_n]``."""

    def __init__(
        self,
        dim: int,
        extents: Sequence[float],
        points_per_axis: Sequence[int],
    ) -> None:
        """Creates a `GridDomain`.

        Parameters
        ----------
        dim : int
            Ambient dimension ``n >= 2``.
        extents : array-like
            Side lengths of the box.
        points_per_axis : array-like
            Number of nodes per axis (at least 3, central stencils need an interior node).
        """
        if not isinstance(dim, (int, np.integer)) or dim < 2:
            raise InvalidGridError(f"Invalid dimension: {dim}. Need dim >= 2.")
        extents = tuple(float(e) for e in extents)
        points = tuple(int(n) for n in points_per_axis)
        if len(extents) != dim:
            raise InvalidGridError(f"Got {len(extents)} extents for a {dim}-dimensional box.")
        if len(points) != dim:
            raise InvalidGridError(f"Got {len(points)} resolutions for a {dim}-dimensional box.")
        if any(not np.isfinite(e) or e <= 0 for e in extents):
            raise InvalidGridError(f"Invalid extents: {extents}")
        if any(n < 3 for n in points):
            raise InvalidGridError(f"Invalid resolution {points}: every axis needs at least 3 points.")

        self._dim = int(dim)
        self._extents = extents
        self._points = points
        self._spacing = tuple(e / (n - 1) for e, n in zip(extents, points))

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def extents(self) -> Tuple[float, ...]:
        return self._extents

    @property
    def points_per_axis(self) -> Tuple[int, ...]:
        return self._points

    @property
    def shape(self) -> Tuple[int, ...]:
        """Array shape of a scalar nodal field."""
        return self._points

    @property
    def spacing(self) -> Tuple[float, ...]:
        """Node spacing ``h_d = extent_d / (points_d - 1)``."""
        return self._spacing

    @property
    def max_spacing(self) -> float:
        return max(self._spacing)

    @property
    def node_count(self) -> int:
        return int(np.prod(self._points))

    @property
    def volume(self) -> float:
        return float(np.prod(self._extents))

    @functools.cached_property
    def axes(self) -> Tuple[np.ndarray, ...]:
        """1-d node coordinates along each axis."""
        return tuple(np.linspace(0.0, e, n) for e, n in zip(self._extents, self._points))

    @functools.cached_property
    def coordinates(self) -> np.ndarray:
        """Nodal positions, shape ``(*shape, n)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    @functools.cached_property
    def axis_weights(self) -> Tuple[np.ndarray, ...]:
        """1-d trapezoidal weights along each axis."""
        result = []
        for h, n in zip(self._spacing, self._points):
            w = np.full(n, h)
            w[[0, -1]] = h / 2
            result.append(w)
        return tuple(result)

    @functools.cached_property
    def weights(self) -> np.ndarray:
        """Tensor-product trapezoidal volume weights, shape ``shape``."""
        return functools.reduce(np.multiply.outer, self.axis_weights)

    def face_mask(self, face: Face) -> np.ndarray:
        """Boolean mask of the nodes on a face (including its edges)."""
        mask = np.zeros(self.shape, dtype=bool)
        index: List[Union[slice, int]] = [slice(None)] * self._dim
        index[face.axis] = 0 if face.side < 0 else -1
        mask[tuple(index)] = True
        return mask

    def face_weights(self, face: Face) -> np.ndarray:
        """Trapezoidal surface weights of one face on the full grid shape (zero off the face)."""
        pairs = zip(self.axis_weights, self._points)
        others = [w if d != face.axis else np.ones(n) for d, (w, n) in enumerate(pairs)]
        surface = functools.reduce(np.multiply.outer, others)
        return np.where(self.face_mask(face), surface, 0.0)

    @functools.cached_property
    def boundary_mask(self) -> np.ndarray:
        """Boolean mask of all boundary nodes."""
        return np.logical_or.reduce([self.face_mask(f) for f in all_faces(self._dim)])

    @functools.cached_property
    def boundary_weights(self) -> np.ndarray:
        """Sum of the face weights of all faces adjacent to each node."""
        return np.sum([self.face_weights(f) for f in all_faces(self._dim)], axis=0)

    @property
    def quadrature(self) -> QuadratureWeights:
        return QuadratureWeights(volume=self.weights, boundary=self.boundary_weights)

    def node_index(self, multi_index: Sequence[int]) -> int:
        """Lexicographic node number of a multi-index."""
        return int(np.ravel_multi_index(tuple(multi_index), self.shape))

    def multi_index(self, node_index: int) -> Tuple[int, ...]:
        """Multi-index of a lexicographic node number."""
        return tuple(int(i) for i in np.unravel_index(node_index, self.shape))

    def __repr__(self) -> str:
        return f"GridDomain(dim={self._dim}, extents={self._extents}, points_per_axis={self._points})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridDomain):
            return NotImplemented
        return (self._dim, self._extents, self._points) == (other._dim, other._extents, other._points)

    def __hash__(self) -> int:
        return hash((self._dim, self._extents, self._points))


def build_grid(
    dim: int,
    extents: Optional[Sequence[float]] = None,
    points_per_axis: Union[int, Sequence[int]] = 8,
) -> GridDomain:
    """Creates a box grid, broadcasting scalar resolutions and defaulting to the unit box.

    Parameters
    ----------
    dim : int
        Ambient dimension.
    extents : array-like, optional
        Side lengths (default: unit box).
    points_per_axis : int or array-like
        Nodes per axis; a scalar applies to every axis.

    Returns
    -------
    grid : GridDomain
    """
    if extents is None:
        extents = [1.0] * dim
    if isinstance(points_per_axis, (int, np.integer)):
        points_per_axis = [int(points_per_axis)] * dim
    return GridDomain(dim, extents, points_per_axis)


def classify_boundary(grid: GridDomain) -> List[BoundaryFacet]:
    """Lists all boundary nodes in lexicographic order with their faces and frames.

    Nodes on exactly one face get that face's normal and the canonical tangent frame
    ``{e_m : m != axis}``. Nodes on several faces keep all adjacent normals and no tangent frame.
    """
    n = grid.dim
    eye = np.eye(n)
    memberships: Dict[int, List[Face]] = {}
    for face in all_faces(n):
        for node in np.flatnonzero(grid.face_mask(face)):
            memberships.setdefault(int(node), []).append(face)

    facets = []
    for node in sorted(memberships):
        faces = tuple(memberships[node])
        normals = np.array([f.normal(n) for f in faces])
        if len(faces) == 1:
            frame = np.delete(eye, faces[0].axis, axis=0)
        else:
            frame = np.zeros((0, n))
        facets.append(
            BoundaryFacet(
                node_index=node,
                multi_index=grid.multi_index(node),
                faces=faces,
                normals=normals,
                tangent_frame=frame,
            )
        )
    return facets


def validate_exponent(p: float) -> float:
    """Returns ``p`` as float or raises `InvalidExponentError` unless 1 < p < ∞."""
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise InvalidExponentError(p)
    if not np.isfinite(p) or p <= 1:
        raise InvalidExponentError(p)
    return p


def _pointwise_norm(values: np.ndarray, ndim: int, skew_packed: bool) -> np.ndarray:
    axes = tuple(range(ndim, values.ndim))
    squares = np.sum(values**2, axis=axes) if axes else values**2
    if skew_packed:
        squares = 2 * squares
    return np.sqrt(squares)


def lp_norm(values: np.ndarray, p: float, weights: np.ndarray, *, skew_packed: bool = False) -> float:
    """Discrete ``L^p`` norm ``(Σ_x w_x ‖v(x)‖_F^p)^(1/p)``.

    Parameters
    ----------
    values : array-like
        Nodal values of shape ``weights.shape + value_shape``.
    p : float
        Exponent with 1 < p < ∞.
    weights : array-like
        Nodal quadrature weights.
    skew_packed : bool
        If set, the trailing axis holds packed so(n) components and the pointwise norm is the
        Frobenius norm of the full skew tensor.

    Returns
    -------
    norm : float
    """
    p = validate_exponent(p)
    weights = np.asarray(weights, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape[: weights.ndim] != weights.shape:
        raise ValueError(f"Values of shape {values.shape} do not match weights of shape {weights.shape}.")
    pointwise = _pointwise_norm(values, weights.ndim, skew_packed)
    scale = np.max(pointwise)
    if scale == 0:
        return 0.0
    # scaling keeps large exponents from overflowing
    return float(scale * np.sum(weights * (pointwise / scale) ** p) ** (1 / p))


def lp_norm_gradient(
    values: np.ndarray, p: float, weights: np.ndarray, *, skew_packed: bool = False
) -> np.ndarray:
    """Euclidean gradient of `lp_norm` with respect to the nodal values.

    At nodes with vanishing values the zero subgradient is returned.
    """
    p = validate_exponent(p)
    weights = np.asarray(weights, dtype=float)
    values = np.asarray(values, dtype=float)
    norm = lp_norm(values, p, weights, skew_packed=skew_packed)
    if norm == 0:
        return np.zeros_like(values)
    pointwise = _pointwise_norm(values, weights.ndim, skew_packed) / norm
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(pointwise > 0, weights * pointwise ** (p - 2), 0.0)
    if skew_packed:
        factor = 2 * factor
    factor = factor.reshape(factor.shape + (1,) * (values.ndim - weights.ndim))
    return factor * values / norm
