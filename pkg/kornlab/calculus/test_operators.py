import numpy as np
import pytest

from kornlab.calculus import algebra, operators
from kornlab.calculus.domain import build_grid
from kornlab.calculus.exceptions import DimensionMismatchError
from kornlab.calculus.manufactured import PolynomialField


def _unit_spaced_grid(dim: int, points: int):
    return build_grid(dim, [points - 1] * dim, points)


class TestDerivativeMatrix:
    def test_stencils(self) -> None:
        D = operators.derivative_matrix(5, 0.5)
        np.testing.assert_array_equal(D[0, :3], [-3.0, 4.0, -1.0])
        np.testing.assert_array_equal(D[2, 1:4], [-1.0, 0.0, 1.0])
        np.testing.assert_array_equal(D[-1, -3:], [1.0, -4.0, 3.0])
        with pytest.raises(ValueError):
            D[0, 0] = 1
        with pytest.raises(ValueError, match="at least 3"):
            operators.derivative_matrix(2, 1.0)
        return

    def test_matches_numpy_gradient(self) -> None:
        grid = build_grid(2, (1.0, 3.0), (6, 9))
        rng = np.random.default_rng(1)
        f = rng.standard_normal(grid.shape)
        for axis in range(2):
            expected = np.gradient(f, grid.spacing[axis], axis=axis, edge_order=2)
            np.testing.assert_allclose(operators.partial(grid, f, axis), expected, atol=1e-12)
        return

    def test_adjoints(self) -> None:
        grid = build_grid(3, (1.0, 2.0, 1.5), (4, 5, 3))
        rng = np.random.default_rng(2)
        x = rng.standard_normal(grid.shape + (3, 3))
        y = rng.standard_normal(grid.shape + (3, 3))
        for axis in range(3):
            lhs = np.sum(operators.partial(grid, x, axis) * y)
            rhs = np.sum(x * operators.partial_adjoint(grid, y, axis))
            np.testing.assert_allclose(lhs, rhs, rtol=1e-12)
        C = rng.standard_normal(grid.shape + (3, 3))
        lhs = np.sum(operators.curl_matrix(grid, x) * C)
        rhs = np.sum(x * operators.curl_matrix_adjoint(grid, C))
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12)
        return


class TestGradVector:
    def test_affine(self) -> None:
        grid = build_grid(3, (1.0, 2.0, 0.5), (4, 6, 5))
        rng = np.random.default_rng(3)
        A = rng.standard_normal((3, 3))
        b = rng.standard_normal(3)
        v = grid.coordinates @ A.T + b
        expected = np.broadcast_to(A, grid.shape + (3, 3))
        np.testing.assert_allclose(operators.grad_vector(grid, v), expected, atol=1e-12)
        np.testing.assert_allclose(operators.grad_vector(grid, np.ones(grid.shape + (3,))), 0, atol=1e-12)
        return

    @pytest.mark.parametrize("dim", [2, 3])
    def test_quadratic_exact(self, dim) -> None:
        grid = build_grid(dim, [1.0] * dim, 7)
        rng = np.random.default_rng(dim)
        v = PolynomialField.random(dim, 2, (dim,), rng)
        np.testing.assert_allclose(operators.grad_vector(grid, v.sample(grid)), v.gradient(grid), atol=1e-10)
        return

    def test_shape_check(self) -> None:
        grid = build_grid(2, points_per_axis=4)
        with pytest.raises(DimensionMismatchError, match="vector field"):
            operators.grad_vector(grid, np.zeros((4, 4, 3)))
        return

    def test_grad_scalar(self) -> None:
        grid = build_grid(2, points_per_axis=5)
        f = PolynomialField(2, {(1, 1): 1.0, (2, 0): 3.0}, ())
        x, y = grid.coordinates[..., 0], grid.coordinates[..., 1]
        expected = np.stack([y + 6 * x, x], axis=-1)
        np.testing.assert_allclose(operators.grad_scalar(grid, f.sample(grid)), expected, atol=1e-12)
        return


class TestCurl:
    def test_curl_vector_rotation(self) -> None:
        grid = build_grid(2, points_per_axis=6)
        x = grid.coordinates
        v = np.stack([-x[..., 1], x[..., 0]], axis=-1)
        np.testing.assert_allclose(operators.curl_vector(grid, v), 2.0, atol=1e-12)
        return

    def test_curl_vector_of_gradient(self) -> None:
        grid = build_grid(3, points_per_axis=6)
        phi = PolynomialField(3, {(2, 0, 0): 1.5, (0, 2, 0): -0.5, (0, 0, 2): 2.0}, ())
        v = phi.gradient(grid)
        np.testing.assert_allclose(operators.curl_vector(grid, v), 0, atol=1e-12)
        np.testing.assert_allclose(operators.curl_vector(grid, np.ones(grid.shape + (3,))), 0, atol=1e-12)
        return

    def test_curl_matrix_linear_example(self) -> None:
        grid = build_grid(2, points_per_axis=5)
        P = np.zeros(grid.shape + (2, 2))
        P[..., 0, 0] = grid.coordinates[..., 1]
        C = operators.curl_matrix(grid, P)
        assert C.shape == grid.shape + (2, 1)
        np.testing.assert_allclose(C[..., 0, 0], -1.0, atol=1e-12)
        np.testing.assert_allclose(C[..., 1, 0], 0.0, atol=1e-12)
        return

    def test_curl_matrix_rows(self) -> None:
        grid = build_grid(3, points_per_axis=4)
        rng = np.random.default_rng(4)
        P = rng.standard_normal(grid.shape + (3, 3))
        C = operators.curl_matrix(grid, P)
        for k in range(3):
            np.testing.assert_allclose(C[..., k, :], operators.curl_vector(grid, P[..., k, :]), atol=1e-12)
        return

    @pytest.mark.parametrize("dim,points", [(2, 16), (3, 8)])
    def test_curl_of_gradient(self, dim, points) -> None:
        # unit spacing keeps stencil weights of order one
        grid = _unit_spaced_grid(dim, points)
        rng = np.random.default_rng(100 + dim)
        worst = 0.0
        for _ in range(100):
            v = PolynomialField.random(dim, 3, (dim,), rng).sample(grid)
            v /= np.max(np.abs(v))
            C = operators.curl_matrix(grid, operators.grad_vector(grid, v))
            worst = max(worst, float(np.max(np.abs(C))))
        assert worst <= 1e-13
        return

    def test_constant_skew_kernel(self) -> None:
        grid = build_grid(4, points_per_axis=3)
        rng = np.random.default_rng(5)
        A = np.broadcast_to(algebra.unpack_skew(rng.standard_normal(6)), grid.shape + (4, 4))
        np.testing.assert_allclose(operators.curl_matrix(grid, A), 0, atol=1e-12)
        return

    def test_classical_curl(self) -> None:
        grid = build_grid(3, (1.0, 2.0, 1.0), (5, 4, 6))
        rng = np.random.default_rng(6)
        field = PolynomialField.random(3, 2, (3, 3), rng)
        dP = field.gradient(grid)
        # dP[..., k, j, i] = ∂_i P_kj
        expected = np.stack(
            [
                dP[..., :, 2, 1] - dP[..., :, 1, 2],
                dP[..., :, 0, 2] - dP[..., :, 2, 0],
                dP[..., :, 1, 0] - dP[..., :, 0, 1],
            ],
            axis=-1,
        )
        np.testing.assert_allclose(operators.classical_curl(grid, field.sample(grid)), expected, atol=1e-10)
        with pytest.raises(ValueError, match="n=3"):
            operators.classical_curl(build_grid(2, points_per_axis=3), np.zeros((3, 3, 2, 2)))
        return


class TestDiv:
    def test_constants(self) -> None:
        grid = build_grid(3, points_per_axis=4)
        identity = np.broadcast_to(np.eye(3), grid.shape + (3, 3))
        np.testing.assert_allclose(operators.div_matrix(grid, identity), 0, atol=1e-12)
        A = algebra.unpack_skew([1.0, -2.0, 0.5])
        skew_field = np.broadcast_to(A, grid.shape + (3, 3))
        np.testing.assert_allclose(operators.div_matrix(grid, skew_field), 0, atol=1e-12)
        return

    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_dyad(self, dim) -> None:
        grid = build_grid(dim, [1.0] * dim, 4)
        x = grid.coordinates
        P = x[..., :, np.newaxis] * x[..., np.newaxis, :]
        np.testing.assert_allclose(operators.div_matrix(grid, P), (dim + 1) * x, atol=1e-11)
        return


class TestGradSkewFromCurl:
    def test_linear_example(self) -> None:
        grid = build_grid(3, points_per_axis=5)
        A = np.zeros(grid.shape + (3,))
        A[..., 0] = grid.coordinates[..., 2]
        dA = operators.grad_skew_from_curl(operators.curl_matrix(grid, algebra.unpack_skew(A)))
        expected = np.zeros(grid.shape + (3, 3))
        expected[..., 2, 0] = 1.0
        np.testing.assert_allclose(dA, expected, atol=1e-12)
        return

    def test_random_quadratic(self) -> None:
        grid = build_grid(4, points_per_axis=5)
        rng = np.random.default_rng(7)
        A = PolynomialField.random(4, 2, (6,), rng).sample(grid)
        C = operators.curl_matrix(grid, algebra.unpack_skew(A))
        expected = np.moveaxis(operators.gradient(grid, A), -1, -2)
        np.testing.assert_allclose(operators.grad_skew_from_curl(C), expected, atol=1e-11)
        return

    def test_constant_and_nonconstant(self) -> None:
        grid = build_grid(3, points_per_axis=4)
        rng = np.random.default_rng(8)
        constant = np.broadcast_to(algebra.unpack_skew(rng.standard_normal(3)), grid.shape + (3, 3))
        recovered = operators.grad_skew_from_curl(operators.curl_matrix(grid, constant))
        np.testing.assert_allclose(recovered, 0, atol=1e-12)
        varying = algebra.unpack_skew(rng.standard_normal(grid.shape + (3,)))
        assert np.max(np.abs(operators.grad_skew_from_curl(operators.curl_matrix(grid, varying)))) > 0.1
        return

    @pytest.mark.parametrize("dim", [2, 3, 5])
    def test_gradient_control(self, dim) -> None:
        grid = build_grid(dim, [1.0] * dim, 4 if dim < 5 else 3)
        rng = np.random.default_rng(9)
        A = rng.standard_normal(grid.shape + (algebra.packed_size(dim),))
        ratio = operators.skew_gradient_ratio(grid, A)
        assert 0 < ratio <= 1.5 + 1e-12
        assert operators.skew_gradient_ratio(grid, np.ones_like(A)) == 0
        return


class TestConsistency:
    def test_second_order(self) -> None:
        errors = []
        for points in (33, 65, 129):
            grid = build_grid(2, (1.0, 1.0), points)
            x, y = grid.coordinates[..., 0], grid.coordinates[..., 1]
            P = np.stack(
                [
                    np.stack([np.sin(x) * np.cos(y), np.exp(x * y)], axis=-1),
                    np.stack([x**3 * y, np.cos(2 * y)], axis=-1),
                ],
                axis=-2,
            )
            dP = np.zeros(grid.shape + (2, 2, 2))
            dP[..., 0, 0, :] = np.stack([np.cos(x) * np.cos(y), -np.sin(x) * np.sin(y)], axis=-1)
            dP[..., 0, 1, :] = np.stack([y * np.exp(x * y), x * np.exp(x * y)], axis=-1)
            dP[..., 1, 0, :] = np.stack([3 * x**2 * y, x**3], axis=-1)
            dP[..., 1, 1, :] = np.stack([np.zeros_like(x), -2 * np.sin(2 * y)], axis=-1)
            curl = dP[..., :, 1, 0] - dP[..., :, 0, 1]
            div = dP[..., :, 0, 0] + dP[..., :, 1, 1]
            errors.append(
                [
                    np.max(np.abs(operators.gradient(grid, P) - dP)),
                    np.max(np.abs(operators.curl_matrix(grid, P)[..., 0] - curl)),
                    np.max(np.abs(operators.div_matrix(grid, P) - div)),
                ]
            )
        rates = np.log(np.array(errors[:-1]) / np.array(errors[1:])) / np.log(2)
        assert np.all(rates >= 1.8)
        return

    def test_linearity(self) -> None:
        grid = build_grid(3, points_per_axis=4)
        rng = np.random.default_rng(10)
        F, G = rng.standard_normal((2,) + grid.shape + (3, 3))
        for op in (operators.curl_matrix, operators.div_matrix, operators.gradient):
            np.testing.assert_allclose(
                op(grid, 2.5 * F - 0.5 * G), 2.5 * op(grid, F) - 0.5 * op(grid, G), atol=1e-11
            )
        return
