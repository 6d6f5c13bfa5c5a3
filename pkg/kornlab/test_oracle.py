import numpy as np
import pytest

from kornlab import oracle
from kornlab.calculus import algebra
from kornlab.calculus.domain import build_grid
from kornlab.estimation import estimators
from kornlab.estimation.admissible import MatrixFields
from kornlab.estimation.estimators import EstimatorConfig


class TestAssemble:
    @pytest.mark.parametrize("form", ["sym", "curl", "korn", "mass"])
    def test_matches_matrix_free(self, form) -> None:
        grid = build_grid(2, (1.0, 1.5), (4, 5))
        problem = MatrixFields(grid, "-x1,+x2")
        dense = oracle.assemble(form, grid, "-x1,+x2")
        operator = {
            "sym": problem.sym_form,
            "curl": problem.curl_form,
            "korn": problem.stiffness,
            "mass": problem.mass,
        }[form]
        assert dense.symmetry_error == 0
        assert dense.dimension == dense.basis.shape[1] < problem.size
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = dense.basis @ rng.standard_normal(dense.dimension)
            expected = dense.basis @ (dense.basis.T @ operator(x))
            np.testing.assert_allclose(
                dense.apply(x), expected, rtol=0, atol=1e-12 * np.linalg.norm(expected)
            )
        return

    def test_mass_without_gamma(self) -> None:
        grid = build_grid(2, points_per_axis=4)
        dense = oracle.assemble(oracle.Form.MASS, grid)
        assert dense.dimension == 16 * 4
        x = np.random.default_rng(2).standard_normal(dense.dimension)
        w = np.broadcast_to(grid.weights[..., None, None], grid.shape + (2, 2)).ravel()
        np.testing.assert_allclose(dense.apply(x), w * x, atol=1e-13)
        return

    def test_sym_of_constant_skew(self) -> None:
        grid = build_grid(3, points_per_axis=4)
        dense = oracle.assemble("sym", grid)
        A = algebra.unpack_skew(np.array([1.0, -2.0, 0.5]), 3)
        x = np.broadcast_to(A, grid.shape + (3, 3)).ravel()
        assert np.linalg.norm(dense.apply(x)) <= 1e-12
        return

    def test_invalid_form(self) -> None:
        with pytest.raises(ValueError):
            oracle.assemble("energy", build_grid(2, points_per_axis=4))
        assert oracle.Form("korn") is oracle.Form.KORN
        assert "assemble" in oracle.Form.__doc__
        return

    def test_size_limit(self, monkeypatch) -> None:
        monkeypatch.setattr(oracle, "MAX_DIMENSION", 10)
        with pytest.raises(oracle.OracleSizeError, match="limit of 10"):
            oracle.assemble("korn", build_grid(2, points_per_axis=4))
        return


class TestJacobi:
    def test_known_eigenvalues(self) -> None:
        rng = np.random.default_rng(3)
        X = rng.standard_normal((7, 7))
        S = X + X.T
        eigenvalues, V, sweeps = oracle.jacobi_eigh(S)
        np.testing.assert_allclose(eigenvalues, np.linalg.eigvalsh(S), atol=1e-12 * np.linalg.norm(S))
        np.testing.assert_allclose(V.T @ V, np.eye(7), atol=1e-12)
        np.testing.assert_allclose(S @ V, V * eigenvalues, atol=1e-11 * np.linalg.norm(S))
        assert 1 <= sweeps < 60
        return

    def test_off_diagonal_resolved_to_rounding(self) -> None:
        rng = np.random.default_rng(4)
        Q, _ = np.linalg.qr(rng.standard_normal((40, 40)))
        S = (Q * np.logspace(-3, 2, 40)) @ Q.T
        eigenvalues, V, _ = oracle.jacobi_eigh(S)
        residuals = np.linalg.norm(S @ V - V * eigenvalues, axis=0)
        assert np.max(residuals) <= 1e-12 * np.linalg.norm(S)
        np.testing.assert_allclose(eigenvalues, np.logspace(-3, 2, 40), atol=1e-10 * np.linalg.norm(S))
        return

    def test_diagonal_and_scalar(self) -> None:
        eigenvalues, V, _ = oracle.jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
        np.testing.assert_array_equal(eigenvalues, [-1.0, 2.0, 3.0])
        np.testing.assert_array_equal(np.abs(V), np.eye(3)[:, [1, 2, 0]])
        eigenvalues, V, _ = oracle.jacobi_eigh(np.array([[5.0]]))
        np.testing.assert_array_equal(eigenvalues, [5.0])
        np.testing.assert_array_equal(V, [[1.0]])
        return

    def test_round_robin_covers_all_pairs(self) -> None:
        rounds = oracle._round_robin(6)
        assert rounds.shape == (5, 3, 2)
        pairs = {tuple(sorted(pair)) for pairs in rounds for pair in pairs}
        assert len(pairs) == 15
        for pairs in rounds:
            assert len(set(pairs.ravel())) == 6
        return


class TestFullSpectrum:
    @pytest.mark.parametrize("dim,kernel", [(2, 1), (3, 3)])
    def test_kernel_of_constant_skew_fields(self, dim, kernel) -> None:
        grid = build_grid(dim, points_per_axis=4)
        korn = oracle.assemble("korn", grid)
        spectrum = oracle.full_spectrum(korn, oracle.assemble("mass", grid))
        eigenvalues = spectrum.eigenvalues
        assert oracle.kernel_dimension(eigenvalues) == kernel
        assert eigenvalues[kernel] >= 1e-6 * eigenvalues[-1]
        assert np.max(spectrum.residuals) <= 1e-10
        assert spectrum.orthonormality_error <= 1e-10
        # kernel vectors are constant skew fields
        for j in range(kernel):
            P = np.reshape(korn.basis @ spectrum.eigenvectors[:, j], grid.shape + (dim, dim))
            np.testing.assert_allclose(P, np.broadcast_to(P.mean(axis=tuple(range(dim))), P.shape), atol=1e-5)
            np.testing.assert_allclose(algebra.sym(P), 0, atol=1e-5)
        return

    def test_full_bc_removes_kernel(self) -> None:
        grid = build_grid(2, points_per_axis=4)
        korn, mass = oracle.assemble("korn", grid, "all"), oracle.assemble("mass", grid, "all")
        spectrum = oracle.full_spectrum(korn, mass)
        assert oracle.kernel_dimension(spectrum.eigenvalues) == 0
        assert spectrum.eigenvalues[0] > 0
        return

    def test_mass_against_itself(self) -> None:
        grid = build_grid(2, points_per_axis=4)
        mass = oracle.assemble("mass", grid, "+x1")
        spectrum = oracle.full_spectrum(mass, mass)
        np.testing.assert_allclose(spectrum.eigenvalues, 1.0, rtol=1e-12)
        return

    def test_not_positive_definite(self) -> None:
        grid = build_grid(2, points_per_axis=4)
        op = oracle.assemble("korn", grid)
        negative = oracle.DenseOperator(-op.matrix, op.basis)
        with pytest.raises(oracle.NotPositiveDefiniteError, match="not positive definite"):
            oracle.full_spectrum(op, negative)
        return

    def test_kernel_dimension(self) -> None:
        assert oracle.kernel_dimension(np.array([])) == 0
        assert oracle.kernel_dimension(np.array([1e-14, 2e-11, 1.0, 5.0])) == 2
        return


class TestAgainstEstimators:
    @pytest.mark.parametrize(
        "inequality,dim,points",
        [
            ("korn_full_bc", 2, 8),
            ("korn_full_bc", 3, 5),
        ],
    )
    def test_full_bc(self, inequality, dim, points) -> None:
        cfg = EstimatorConfig(inequality, build_grid(dim, points_per_axis=points))
        report = estimators.estimate_constant_p2(cfg)
        expected = oracle.oracle_lambda_min(estimators.build_problem(cfg))
        assert report.converged
        assert report.residual <= cfg.tol_rel
        np.testing.assert_allclose(report.lambda_min, expected, rtol=1e-6)
        return

    def test_loose_tolerance_is_still_accurate(self) -> None:
        cfg = EstimatorConfig("korn_full_bc", build_grid(2, points_per_axis=8), tol_rel=1e-5)
        report = estimators.estimate_constant_p2(cfg)
        expected = oracle.oracle_lambda_min(estimators.build_problem(cfg))
        assert report.converged
        assert report.residual <= 1e-5
        np.testing.assert_allclose(report.lambda_min, expected, rtol=1e-4)
        return

    def test_tangential_korn(self) -> None:
        cfg = EstimatorConfig("tangential_korn", build_grid(2, points_per_axis=8), gamma="all")
        report = estimators.tangential_korn_constant(cfg)
        expected = oracle.oracle_lambda_min(estimators.build_problem(cfg))
        np.testing.assert_allclose(report.lambda_min, expected, rtol=1e-6)
        return

    def test_partial_bc(self) -> None:
        cfg = EstimatorConfig("korn_partial_bc", build_grid(2, (1.0, 2.0), (5, 7)), gamma="-x2")
        report = estimators.estimate(cfg)
        expected = oracle.oracle_lambda_min(estimators.build_problem(cfg))
        np.testing.assert_allclose(report.lambda_min, expected, rtol=1e-6)
        return
