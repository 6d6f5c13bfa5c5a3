"""Run configuration, report documents and config file parsing for the command line."""
import enum
import pathlib
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from kornlab.calculus.domain import GridDomain, build_grid, parse_faces, validate_exponent
from kornlab.estimation.estimators import EstimatorConfig, EstimatorReport, Inequality

__all__ = (
    "Command",
    "CONFIG_ALIASES",
    "ConfigFileError",
    "IdentityRecord",
    "KernelCheck",
    "merge_settings",
    "OracleComparison",
    "parse_config_file",
    "ReportFile",
    "RunConfig",
    "SweepAxis",
    "SweepRow",
)


class ConfigFileError(ValueError):
    """Error indicating a malformed configuration file."""

    def __init__(self, path: Union[str, pathlib.Path], line_number: int, line: str) -> None:
        super().__init__(f"{path}:{line_number}: expected 'key=value', got '{line.strip()}'.")


class Command(str, enum.Enum):
    VERIFY_IDENTITIES = "verify-identities"
    ESTIMATE = "estimate"
    SWEEP = "sweep"


class SweepAxis(str, enum.Enum):
    GRID = "grid"
    P = "p"
    DIM = "dim"
    GAMMA = "gamma"


def _split(value: Any, separator: str = ",") -> Any:
    if isinstance(value, str):
        return tuple(v.strip() for v in value.split(separator) if v.strip())
    return value


def _broadcast(values: Tuple, dim: int, what: str) -> Tuple:
    if len(values) == 1:
        return values * dim
    if len(values) != dim:
        raise ValueError(f"{what} needs 1 or {dim} values, got {len(values)}.")
    return values


class RunConfig(BaseModel):
    """All parameters of one command line run.

    The model is validated as a whole, so that every precondition of the estimators is checked
    before any computation starts.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: Command
    dim: int = 2
    extents: Optional[Tuple[float, ...]] = None
    """Box side lengths, one value for all axes or one per axis. Defaults to the unit box."""
    grid: Tuple[int, ...] = (8,)
    """Nodes per axis, one value for all axes or one per axis."""
    p: float = 2.0
    inequality: Inequality = Inequality.KORN_FULL_BC
    gamma: Optional[str] = None
    max_iter: int = Field(500, ge=1)
    tol_rel: float = Field(1e-10, gt=0)
    seed: int = Field(0, ge=0)
    n_starts: int = Field(8, ge=1)
    oracle: bool = False
    out: Optional[str] = None
    csv: Optional[str] = None
    dims: Tuple[int, ...] = (2, 3, 4)
    """Dimensions checked by ``verify-identities``."""
    axis: Optional[SweepAxis] = None
    values: Tuple[str, ...] = ()
    """Sweep values. Face sets of a ``gamma`` sweep are separated by ``;``."""

    @field_validator("extents", "grid", "dims", mode="before")
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        return _split(value)

    @field_validator("values", mode="before")
    @classmethod
    def _split_values(cls, value: Any) -> Any:
        if isinstance(value, str):
            return _split(value, ";" if ";" in value else ",")
        return value

    @field_validator("p")
    @classmethod
    def _check_p(cls, p: float) -> float:
        return validate_exponent(p)

    @field_validator("dim")
    @classmethod
    def _check_dim(cls, dim: int) -> int:
        if dim < 2:
            raise ValueError(f"dim must be ≥ 2, got {dim}.")
        return dim

    @field_validator("gamma")
    @classmethod
    def _normalize_gamma(cls, gamma: Optional[str]) -> Optional[str]:
        if gamma is None:
            return None
        return gamma.replace(" ", "").replace("−", "-")

    @field_validator("dims")
    @classmethod
    def _check_dims(cls, dims: Tuple[int, ...]) -> Tuple[int, ...]:
        if not dims:
            raise ValueError("dims must not be empty.")
        if min(dims) < 2:
            raise ValueError(f"Identities are checked for n ≥ 2, got {min(dims)}.")
        return dims

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        if self.command == Command.VERIFY_IDENTITIES:
            return self
        if self.command == Command.SWEEP:
            self._check_sweep()
            for index, value in enumerate(self.values):
                try:
                    self.sweep_point(index)
                except ValidationError as ex:
                    raise ValueError(f"Sweep point {value}: {ex.errors()[0]['msg']}")
        else:
            self.estimator_config()
        return self

    def _check_sweep(self) -> None:
        if self.axis is None:
            raise ValueError("A sweep needs an axis (grid, p, dim or gamma).")
        if not self.values:
            raise ValueError("The sweep needs at least one value.")
        if self.axis == SweepAxis.GAMMA:
            return
        try:
            numbers = [float(v) for v in self.values]
        except ValueError:
            raise ValueError(
                f"Sweep values along '{self.axis.value}' must be numbers, got {list(self.values)}."
            )
        steps = [b - a for a, b in zip(numbers[:-1], numbers[1:])]
        if not (all(s > 0 for s in steps) or all(s < 0 for s in steps)):
            raise ValueError(f"Sweep values must be strictly monotone, got {list(self.values)}.")

    def build_grid(self) -> GridDomain:
        extents = None if self.extents is None else _broadcast(self.extents, self.dim, "extents")
        return build_grid(self.dim, extents, list(_broadcast(self.grid, self.dim, "grid")))

    def estimator_config(self) -> EstimatorConfig:
        """The estimator settings of an ``estimate`` run or of one sweep point."""
        grid = self.build_grid()
        gamma = self.gamma
        if gamma is not None:
            parse_faces(gamma, self.dim)
        return EstimatorConfig(
            self.inequality,
            grid,
            p=self.p,
            gamma=gamma,
            max_iter=self.max_iter,
            tol_rel=self.tol_rel,
            seed=self.seed,
            n_starts=self.n_starts,
        )

    def sweep_point(self, index: int) -> "RunConfig":
        """The configuration of one sweep point as an ``estimate`` run."""
        value = self.values[index]
        changes: Dict[str, Any] = dict(command=Command.ESTIMATE, axis=None, values=(), csv=None, out=None)
        if self.axis == SweepAxis.GRID:
            changes["grid"] = (int(float(value)),)
        elif self.axis == SweepAxis.P:
            changes["p"] = float(value)
        elif self.axis == SweepAxis.DIM:
            changes["dim"] = int(float(value))
        else:
            changes["gamma"] = value
        return RunConfig(**{**self.model_dump(), **changes})


class OracleComparison(BaseModel):
    """The iterative ``λ_min`` against the dense reference spectrum."""

    lambda_min: float
    relative_deviation: float
    dimension: int
    sweeps: int
    max_residual: float


class KernelCheck(BaseModel):
    """Count of eigenvalues below ``rel_tol · λ_max`` in the dense spectrum."""

    kernel_dimension: int
    rel_tol: float
    expected: int

    @property
    def passed(self) -> bool:
        return self.kernel_dimension == self.expected


class IdentityRecord(BaseModel):
    name: str
    dim: int
    residual: float
    tolerance: float
    samples: int
    passed: bool


class SweepRow(BaseModel):
    value: str
    h: Optional[float] = None
    constant_estimate: Optional[float] = None
    quotient_value: Optional[float] = None
    lambda_min: Optional[float] = None
    converged: Optional[bool] = None
    status: str = "ok"


class ReportFile(BaseModel):
    """The JSON document written by every command.

    Timing fields are the only content that differs between repeated runs with the same
    configuration.
    """

    model_config = ConfigDict(extra="forbid")

    version: str
    config: RunConfig
    status: str = "ok"
    constant_estimate: Optional[float] = None
    quotient_value: Optional[float] = None
    lambda_min: Optional[float] = None
    iterations: Optional[int] = None
    residual: Optional[float] = None
    converged: Optional[bool] = None
    lower_bound: Optional[bool] = None
    route: Optional[str] = None
    sum_form_bracket: Optional[Tuple[float, float]] = None
    sum_form_value: Optional[float] = None
    best_start: Optional[str] = None
    start_values: List[float] = []
    trace: List[float] = []
    timings_ms: Dict[str, float] = {}
    oracle: Optional[OracleComparison] = None
    kernel_check: Optional[KernelCheck] = None
    identities: Optional[List[IdentityRecord]] = None
    refinement_table: Optional[List[SweepRow]] = None

    @classmethod
    def from_estimate(
        cls, version: str, config: RunConfig, report: EstimatorReport, **kwargs
    ) -> "ReportFile":
        return cls(
            version=version,
            config=config,
            constant_estimate=float(report.constant_estimate),
            quotient_value=float(report.quotient_value),
            lambda_min=None if report.lambda_min is None else float(report.lambda_min),
            iterations=int(report.iterations),
            residual=float(report.residual),
            converged=bool(report.converged),
            lower_bound=bool(report.lower_bound),
            route=report.route,
            sum_form_bracket=(
                None if report.sum_form_bracket is None else tuple(map(float, report.sum_form_bracket))
            ),
            sum_form_value=None if report.sum_form_value is None else float(report.sum_form_value),
            best_start=report.best_start,
            start_values=[float(v) for v in report.start_values],
            trace=[float(t) for t in report.trace],
            **kwargs,
        )

    def to_json(self) -> str:
        return self.model_dump_json(indent=2) + "\n"

    @classmethod
    def from_json(cls, text: Union[str, bytes]) -> "ReportFile":
        return cls.model_validate_json(text)

    def without_timings(self) -> Dict[str, Any]:
        """The report content that is reproducible for a fixed seed."""
        return self.model_dump(mode="json", exclude={"timings_ms"})


CONFIG_ALIASES = {"ineq": "inequality", "starts": "n_starts"}
"""Config file keys that are spelled like their command line flag."""


def parse_config_file(path: Union[str, pathlib.Path]) -> Dict[str, str]:
    """Reads ``key=value`` lines from a UTF-8 file.

    Blank lines and lines starting with ``#`` are skipped; dashes in keys become underscores,
    so ``max-iter=50`` and ``max_iter=50`` are equivalent. Keys may also use the flag names
    in `CONFIG_ALIASES`.

    Raises
    ------
    ConfigFileError
        On a line without ``=`` or with an empty key.
    """
    values: Dict[str, str] = {}
    text = pathlib.Path(path).read_text(encoding="utf-8")
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ConfigFileError(path, number, line)
        values[CONFIG_ALIASES.get(key, key)] = value.strip()
    return values


def merge_settings(*layers: Optional[Mapping[str, Any]]) -> Dict[str, Any]:
    """Merges setting layers from low to high precedence, skipping ``None`` values."""
    merged: Dict[str, Any] = {}
    for layer in layers:
        if layer:
            merged.update({k: v for k, v in layer.items() if v is not None})
    return merged
