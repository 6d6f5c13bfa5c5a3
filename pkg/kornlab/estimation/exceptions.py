"""Exceptions raised while estimating inequality constants."""

__all__ = (
    "EmptySubspaceError",
    "EstimatorError",
    "KernelLeakError",
)


class EstimatorError(Exception):
    """Base class of errors during constant estimation."""


class EmptySubspaceError(EstimatorError):
    """Error indicating that the constraints leave no non-zero admissible field."""

    def __init__(self, what: str) -> None:
        super().__init__(f"The admissible class {what} has dimension 0 on this grid.")


class KernelLeakError(EstimatorError):
    """Error indicating a non-zero admissible field with vanishing right-hand side."""

    def __init__(self, what: str, rhs: float, lhs: float) -> None:
        super().__init__(
            f"Found an admissible field of {what} with right-hand side {rhs:.3e} at norm {lhs:.3e}. "
            "The boundary conditions do not remove the kernel."
        )
