"""Exceptions that indicate problems with pointwise algebra, grids or fields."""

__all__ = (
    "DegenerateInputError",
    "DimensionMismatchError",
    "EmptyGammaError",
    "InvalidExponentError",
    "InvalidGridError",
)


class DimensionMismatchError(ValueError):
    """Error indicating that the ambient dimensions of two operands disagree."""

    def __init__(self, what: str, expected: object, actual: object) -> None:
        super().__init__(f"Dimension mismatch for {what}: expected {expected}, got {actual}")


class DegenerateInputError(ValueError):
    """Error indicating a zero vector where a non-zero one is required."""


class InvalidGridError(ValueError):
    """Error indicating an unusable grid specification."""


class EmptyGammaError(ValueError):
    """Error indicating an empty set of boundary faces."""

    def __init__(self, what: str = "gamma") -> None:
        super().__init__(f"The face set {what} must contain at least one box face.")


class InvalidExponentError(ValueError):
    """Error indicating an integrability exponent outside of 1 < p < ∞."""

    def __init__(self, p: float) -> None:
        super().__init__(f"Invalid exponent p={p}. The exponent must satisfy 1 < p < ∞.")
