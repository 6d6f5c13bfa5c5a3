"""Polynomial fields with exact derivatives, used as manufactured solutions."""
import itertools
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from kornlab.calculus.domain import GridDomain

__all__ = ("monomial_exponents", "PolynomialField")


def monomial_exponents(dim: int, degree: int) -> Tuple[Tuple[int, ...], ...]:
    """All exponent tuples of ``dim`` variables with total degree ``<= degree``."""
    return tuple(e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) <= degree)


class PolynomialField:
    """A polynomial ``x ↦ Σ_e c_e x^e`` with array-valued coefficients ``c_e``."""

    def __init__(
        self, dim: int, coefficients: Dict[Tuple[int, ...], np.ndarray], value_shape: Sequence[int]
    ) -> None:
        self.dim = dim
        self.value_shape = tuple(value_shape)
        self.coefficients: Dict[Tuple[int, ...], np.ndarray] = {}
        for exponent, c in coefficients.items():
            if len(exponent) != dim:
                raise ValueError(f"Exponent {exponent} does not match dimension {dim}.")
            c = np.broadcast_to(np.asarray(c, dtype=float), self.value_shape).copy()
            self.coefficients[tuple(exponent)] = c

    @classmethod
    def random(
        cls,
        dim: int,
        degree: int,
        value_shape: Sequence[int],
        rng: np.random.Generator,
        *,
        scale: float = 1.0,
    ) -> "PolynomialField":
        """Draws standard normal coefficients for every monomial up to ``degree``."""
        value_shape = tuple(value_shape)
        coefficients = {
            e: scale * rng.standard_normal(value_shape) for e in monomial_exponents(dim, degree)
        }
        return cls(dim, coefficients, value_shape)

    @property
    def degree(self) -> int:
        return max((sum(e) for e, c in self.coefficients.items() if np.any(c)), default=0)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluates the field at points ``x`` of shape ``(..., dim)``."""
        x = np.asarray(x, dtype=float)
        result = np.zeros(x.shape[:-1] + self.value_shape)
        for exponent, c in self.coefficients.items():
            monomial = np.prod(x ** np.array(exponent), axis=-1)
            result += monomial.reshape(monomial.shape + (1,) * len(self.value_shape)) * c
        return result

    def sample(self, grid: GridDomain) -> np.ndarray:
        """Nodal values on a grid, shape ``(*grid.shape, *value_shape)``."""
        if grid.dim != self.dim:
            raise ValueError(f"A {self.dim}-d polynomial cannot be sampled on a {grid.dim}-d grid.")
        return self(grid.coordinates)

    def derivative(self, axis: int) -> "PolynomialField":
        """Exact partial derivative ``∂_axis``."""
        coefficients: Dict[Tuple[int, ...], np.ndarray] = {}
        for exponent, c in self.coefficients.items():
            power = exponent[axis]
            if power == 0:
                continue
            lowered = list(exponent)
            lowered[axis] -= 1
            key = tuple(lowered)
            coefficients[key] = coefficients.get(key, 0) + power * c
        if not coefficients:
            coefficients[(0,) * self.dim] = np.zeros(self.value_shape)
        return PolynomialField(self.dim, coefficients, self.value_shape)

    def gradient(self, grid: Optional[GridDomain] = None, x: Optional[np.ndarray] = None) -> np.ndarray:
        """Exact derivatives stacked on a trailing axis, evaluated on a grid or at points."""
        if (grid is None) == (x is None):
            raise ValueError("Pass exactly one of grid or x.")
        points = grid.coordinates if grid is not None else np.asarray(x, dtype=float)
        return np.stack([self.derivative(d)(points) for d in range(self.dim)], axis=-1)
