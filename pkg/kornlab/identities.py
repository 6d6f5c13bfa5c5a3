"""Randomized checks of the algebraic and discrete identities the estimators rely on.

Every identity draws unit-scaled random inputs from a seeded generator and reports the largest
residual it observed. The suite backs the ``verify-identities`` command.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from kornlab.calculus import algebra, operators
from kornlab.calculus.domain import GridDomain, build_grid
from kornlab.calculus.manufactured import PolynomialField
from kornlab.utils import make_rng

__all__ = (
    "IDENTITIES",
    "Identity",
    "IdentityResult",
    "MAX_RECOMMENDED_DIM",
    "run_identity",
    "verify_identities",
)

logger = logging.getLogger(__name__)

MAX_RECOMMENDED_DIM = 6


def _unit(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    x = rng.standard_normal(shape)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _unit_skew(rng: np.random.Generator, samples: int, n: int) -> np.ndarray:
    """Packed skew matrices of unit Frobenius norm."""
    a = rng.standard_normal((samples, algebra.packed_size(n)))
    return a / algebra.packed_norm(a)[:, np.newaxis]


def _grid(n: int) -> GridDomain:
    """Unit-spaced grid, coarser in higher dimensions."""
    points = {2: 16, 3: 8, 4: 5}.get(n, 3)
    return build_grid(n, [points - 1.0] * n, points)


def _polynomial(
    grid: GridDomain, rng: np.random.Generator, degree: int, value_shape: Tuple[int, ...]
) -> np.ndarray:
    values = PolynomialField.random(grid.dim, degree, value_shape, rng).sample(grid)
    return values / np.max(np.abs(values))


def _check_generalized_cross(n: int, rng: np.random.Generator, samples: int) -> float:
    a, b = _unit(rng, (samples, n)), _unit(rng, (samples, n))
    full = algebra.unpack_skew(algebra.generalized_cross(a, b), n)
    expected = a[:, :, np.newaxis] * b[:, np.newaxis, :] - b[:, :, np.newaxis] * a[:, np.newaxis, :]
    return float(np.max(np.abs(full - expected)))


def _check_crucial_combination(n: int, rng: np.random.Generator, samples: int) -> float:
    A = algebra.unpack_skew(_unit_skew(rng, samples, n), n)
    b = _unit(rng, (samples, n))
    T = algebra.matrix_cross(A, b)
    worst = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                residual = algebra.crucial_combination(T, i, j, k) - 2 * A[:, i, j] * b[:, k]
                worst = max(worst, float(np.max(np.abs(residual))))
    return worst


def _check_recover_skew(n: int, rng: np.random.Generator, samples: int) -> float:
    packed = _unit_skew(rng, samples, n)
    b = _unit(rng, (samples, n))
    worst = 0.0
    for a, v in zip(packed, b):
        T = algebra.matrix_cross(algebra.unpack_skew(a, n), v)
        recovered = algebra.recover_skew(T, v)
        worst = max(worst, float(np.linalg.norm(recovered - a) / np.linalg.norm(a)))
    return worst


def _check_observation_parallel(n: int, rng: np.random.Generator, samples: int) -> float:
    """Rows parallel to ``ν`` give ``P ⨯ ν = 0`` and ``P τ = 0`` for tangents ``τ ⟂ ν``."""
    nu = _unit(rng, (samples, n))
    c = _unit(rng, (samples, n))
    P = c[:, :, np.newaxis] * nu[:, np.newaxis, :]
    tangent = _unit(rng, (samples, n))
    tangent -= np.sum(tangent * nu, axis=-1, keepdims=True) * nu
    trace = algebra.cross_norm(algebra.matrix_cross(P, nu))
    along_tangent = np.linalg.norm(np.einsum("...kj,...j->...k", P, tangent), axis=-1)
    return float(max(np.max(trace), np.max(along_tangent)))


def _check_skew_rank_bound(n: int, rng: np.random.Generator, samples: int) -> float:
    """Fraction of wrong verdicts; a non-zero skew matrix never has all rows parallel to ``ν``."""
    packed = _unit_skew(rng, samples, n)
    nu = _unit(rng, (samples, n))
    verdicts = [algebra.skew_rank_bound(a, v) for a, v in zip(packed, nu)]
    wrong = sum(verdict != algebra.SkewRankVerdict.NONZERO_VIOLATION for verdict in verdicts)
    wrong += algebra.skew_rank_bound(np.zeros(algebra.packed_size(n)), nu[0]) != algebra.SkewRankVerdict.ZERO
    return float(wrong) / (samples + 1)


def _check_sym_skew_orthogonality(n: int, rng: np.random.Generator, samples: int) -> float:
    P = rng.standard_normal((samples, n, n))
    P /= np.linalg.norm(P, axis=(-2, -1), keepdims=True)
    S, W = algebra.sym(P), algebra.skew(P)
    inner = np.abs(np.sum(S * W, axis=(-2, -1)))
    split = np.max(np.abs(S + W - P), axis=(-2, -1))
    return float(max(np.max(inner), np.max(split)))


def _check_axl_cross_compat(n: int, rng: np.random.Generator, samples: int) -> float:
    a, b = _unit(rng, (samples, 3)), _unit(rng, (samples, 3))
    return float(np.max(np.abs(algebra.axl_cross_compat(a, b) - np.cross(a, b))))


def _check_curl_of_gradient(n: int, rng: np.random.Generator, samples: int) -> float:
    grid = _grid(n)
    worst = 0.0
    for _ in range(samples):
        v = _polynomial(grid, rng, 3, (n,))
        C = operators.curl_matrix(grid, operators.grad_vector(grid, v))
        worst = max(worst, float(np.max(np.abs(C))))
    return worst


def _check_grad_skew_from_curl(n: int, rng: np.random.Generator, samples: int) -> float:
    grid = _grid(n)
    worst = 0.0
    for _ in range(samples):
        A = _polynomial(grid, rng, 2, (algebra.packed_size(n),))
        C = operators.curl_matrix(grid, algebra.unpack_skew(A, n))
        expected = np.moveaxis(operators.gradient(grid, A), -1, -2)
        scale = max(float(np.max(np.abs(expected))), 1.0)
        worst = max(worst, float(np.max(np.abs(operators.grad_skew_from_curl(C) - expected))) / scale)
    return worst


def _check_constant_skew_kernel(n: int, rng: np.random.Generator, samples: int) -> float:
    grid = _grid(n)
    worst = 0.0
    for a in _unit_skew(rng, samples, n):
        A = np.broadcast_to(algebra.unpack_skew(a, n), grid.shape + (n, n))
        residual = max(np.max(np.abs(operators.curl_matrix(grid, A))), np.max(np.abs(algebra.sym(A))))
        worst = max(worst, float(residual))
    return worst


def _check_skew_gradient_control(n: int, rng: np.random.Generator, samples: int) -> float:
    """Excess of ``|∂A| / |Curl A|`` over 3/2."""
    grid = _grid(n)
    worst = 0.0
    for _ in range(samples):
        A = rng.standard_normal(grid.shape + (algebra.packed_size(n),))
        worst = max(worst, operators.skew_gradient_ratio(grid, A) - 1.5)
    return max(worst, 0.0)


def _check_classical_curl(n: int, rng: np.random.Generator, samples: int) -> float:
    grid = _grid(3)
    worst = 0.0
    for _ in range(samples):
        P = _polynomial(grid, rng, 2, (3, 3))
        dP = operators.gradient(grid, P)
        # dP[..., k, j, i] = ∂_i P_kj
        expected = np.stack(
            [
                dP[..., :, 2, 1] - dP[..., :, 1, 2],
                dP[..., :, 0, 2] - dP[..., :, 2, 0],
                dP[..., :, 1, 0] - dP[..., :, 0, 1],
            ],
            axis=-1,
        )
        worst = max(worst, float(np.max(np.abs(operators.classical_curl(grid, P) - expected))))
    return worst


@dataclass(frozen=True)
class Identity:
    """A named randomized identity check."""

    name: str
    description: str
    check: Callable[[int, np.random.Generator, int], float]
    tolerance: float
    samples: int
    dims: Optional[Tuple[int, ...]] = None
    """Dimensions the identity is defined for. ``None`` means every ``n >= 2``."""

    def applies_to(self, n: int) -> bool:
        return self.dims is None or n in self.dims


@dataclass
class IdentityResult:
    name: str
    dim: int
    residual: float
    tolerance: float
    samples: int

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tolerance)


IDENTITIES: Dict[str, Identity] = {
    identity.name: identity
    for identity in [
        Identity(
            "generalized_cross",
            "a ⨯ b equals a ⊗ b - b ⊗ a",
            _check_generalized_cross,
            1e-15,
            1000,
        ),
        Identity(
            "crucial_combination",
            "T_kij - T_kji + T_jik = 2 A_ij b_k for T = A ⨯ b",
            _check_crucial_combination,
            1e-12,
            1000,
        ),
        Identity("recover_skew", "A is recovered from A ⨯ b and b", _check_recover_skew, 1e-12, 1000),
        Identity(
            "observation_parallel",
            "rows parallel to ν give P ⨯ ν = 0 and P τ = 0",
            _check_observation_parallel,
            1e-14,
            1000,
        ),
        Identity(
            "skew_rank_bound",
            "a skew matrix with rows parallel to ν vanishes",
            _check_skew_rank_bound,
            0.0,
            200,
        ),
        Identity(
            "sym_skew_orthogonality",
            "sym P ⟂ skew P and P = sym P + skew P",
            _check_sym_skew_orthogonality,
            1e-14,
            1000,
        ),
        Identity(
            "axl_cross_compat",
            "-axl(a ⨯ b) is the classical a × b",
            _check_axl_cross_compat,
            1e-14,
            1000,
            (3,),
        ),
        Identity("curl_of_gradient", "Curl Dv = 0", _check_curl_of_gradient, 1e-12, 10),
        Identity(
            "grad_skew_from_curl",
            "∂A is a linear combination of Curl A",
            _check_grad_skew_from_curl,
            1e-12,
            5,
        ),
        Identity(
            "constant_skew_kernel",
            "sym A = 0 and Curl A = 0 for constant skew A",
            _check_constant_skew_kernel,
            1e-12,
            20,
        ),
        Identity(
            "skew_gradient_control",
            "|∂A| <= 3/2 |Curl A| node-wise",
            _check_skew_gradient_control,
            1e-12,
            5,
        ),
        Identity(
            "classical_curl",
            "row-wise Curl reduces to the classical curl",
            _check_classical_curl,
            1e-12,
            5,
            (3,),
        ),
    ]
}


def run_identity(
    identity: Identity, dim: int, *, seed: int = 0, samples: Optional[int] = None
) -> IdentityResult:
    """Runs one identity in one dimension with its own random stream."""
    stream = list(IDENTITIES).index(identity.name) if identity.name in IDENTITIES else 0
    rng = make_rng(seed, dim, stream)
    samples = identity.samples if samples is None else samples
    residual = identity.check(dim, rng, samples)
    result = IdentityResult(identity.name, dim, float(residual), identity.tolerance, samples)
    log = logger.info if result.passed else logger.error
    log("%s (n=%i): max residual %.3e, tolerance %.1e", identity.name, dim, residual, identity.tolerance)
    return result


def verify_identities(
    dims: Iterable[int] = (2, 3, 4),
    *,
    seed: int = 0,
    names: Optional[Sequence[str]] = None,
) -> List[IdentityResult]:
    """Runs the identity suite over a set of dimensions.

    Parameters
    ----------
    dims : iterable of int
        Dimensions to check, each at least 2. Dimensions above `MAX_RECOMMENDED_DIM` are run
        but emit a warning about their runtime.
    seed : int
        Seed of the random inputs.
    names : sequence of str, optional
        Subset of `IDENTITIES` to run. Defaults to all.

    Returns
    -------
    results : list of IdentityResult
        One entry per applicable identity and dimension, ordered by dimension.
    """
    dims = sorted(set(int(d) for d in dims))
    if not dims:
        raise ValueError("At least one dimension is needed.")
    if dims[0] < 2:
        raise ValueError(f"Identities are checked for n >= 2, got n={dims[0]}.")
    if dims[-1] > MAX_RECOMMENDED_DIM:
        warnings.warn(
            f"Identity checks in n={dims[-1]} > {MAX_RECOMMENDED_DIM} dimensions can take a long time.",
            UserWarning,
            stacklevel=2,
        )
    names = list(IDENTITIES) if names is None else list(names)
    unknown = [name for name in names if name not in IDENTITIES]
    if unknown:
        raise KeyError(f"Unknown identities {unknown}. Choose from {list(IDENTITIES)}.")
    return [
        run_identity(IDENTITIES[name], n, seed=seed)
        for n in dims
        for name in names
        if IDENTITIES[name].applies_to(n)
    ]
