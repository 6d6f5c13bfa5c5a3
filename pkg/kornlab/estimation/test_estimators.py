import numpy as np
import pytest

from kornlab.calculus import algebra
from kornlab.calculus.domain import all_faces, build_grid, lp_norm
from kornlab.calculus.exceptions import EmptyGammaError, InvalidExponentError
from kornlab.estimation import admissible, estimators
from kornlab.estimation.estimators import EstimatorConfig, Inequality
from kornlab.estimation.exceptions import KernelLeakError


def _config(inequality, points=6, dim=2, **kwargs):
    return EstimatorConfig(inequality, build_grid(dim, points_per_axis=points), **kwargs)


class TestEstimatorConfig:
    def test_defaults(self) -> None:
        cfg = _config("korn_full_bc")
        assert cfg.inequality == Inequality.KORN_FULL_BC
        assert cfg.gamma == all_faces(2)
        assert cfg.gamma_labels == "-x1,+x1,-x2,+x2"
        assert cfg.p == 2.0
        assert cfg.solver_options()["n_starts"] == 8
        return

    def test_gamma_rules(self) -> None:
        cfg = _config(Inequality.KORN_PARTIAL_BC, gamma="+x2,-x1")
        assert cfg.gamma_labels == "-x1,+x2"
        with pytest.raises(ValueError, match="needs a non-empty face set"):
            _config("tangential_korn")
        with pytest.raises(EmptyGammaError):
            _config("poincare_skew", gamma="")
        with pytest.raises(ValueError, match="takes no boundary faces"):
            _config("korn_quotient", gamma="all")
        with pytest.raises(ValueError, match="korn_partial_bc"):
            _config("korn_full_bc", gamma="+x1")
        assert _config("korn_full_bc", gamma="all").gamma == all_faces(2)
        return

    def test_invalid(self) -> None:
        for p in (1, 0.5, float("inf")):
            with pytest.raises(InvalidExponentError, match="1 < p < ∞"):
                _config("korn_full_bc", p=p)
        with pytest.raises(ValueError, match="tol_rel"):
            _config("korn_full_bc", tol_rel=0)
        with pytest.raises(ValueError, match="max_iter"):
            _config("korn_full_bc", max_iter=0)
        with pytest.raises(ValueError, match="seed"):
            _config("korn_full_bc", seed=-1)
        with pytest.raises(ValueError):
            _config("korn_everything")
        return


class TestRhsFunctional:
    def test_examples(self) -> None:
        grid = build_grid(3, (1.0, 2.0, 0.5), (4, 5, 3))
        A = algebra.unpack_skew(np.array([1.0, 2.0, -3.0]))
        assert estimators.rhs_functional(grid, np.broadcast_to(A, grid.shape + (3, 3)), 3) <= 1e-12
        assert estimators.rhs_functional(grid, np.zeros(grid.shape + (3, 3)), 3) == 0
        # P = D(x) = I: ‖sym P‖ = ‖I‖ |Ω|^(1/p)
        identity = np.broadcast_to(np.eye(3), grid.shape + (3, 3))
        for p in (1.5, 2.0, 4.0):
            np.testing.assert_allclose(
                estimators.rhs_functional(grid, identity, p), np.sqrt(3) * grid.volume ** (1 / p), rtol=1e-12
            )
        return


class TestEigenRoute:
    def test_full_bc(self) -> None:
        cfg = _config("korn_full_bc", points=6)
        report = estimators.estimate_constant_p2(cfg)
        assert report.converged
        assert report.route == "eigen"
        assert not report.lower_bound
        assert report.config is cfg
        c = report.constant_estimate
        np.testing.assert_allclose(c, report.lambda_min**-0.5, rtol=1e-14)
        np.testing.assert_allclose(c * report.quotient_value, 1.0, rtol=1e-14)
        low, high = report.sum_form_bracket
        np.testing.assert_allclose([low, high], [c / np.sqrt(2), c], rtol=1e-14)
        assert low <= report.sum_form_value <= high
        assert report.minimizer_snapshot.shape == cfg.grid.shape + (2, 2)
        # variational characterization
        problem = estimators.build_problem(cfg)
        rng = np.random.default_rng(1)
        for _ in range(5):
            x = problem.project(rng.standard_normal(problem.size))
            rayleigh = np.dot(x, problem.stiffness(x)) / np.dot(x, problem.mass(x))
            assert rayleigh >= report.lambda_min * (1 - 1e-8)
        return

    def test_requires_p2(self) -> None:
        with pytest.raises(ValueError, match="p=2"):
            estimators.estimate_constant_p2(_config("korn_full_bc", p=3))
        return

    def test_kernel_leak(self, monkeypatch) -> None:
        monkeypatch.setattr(estimators, "build_problem", lambda cfg: admissible.MatrixFields(cfg.grid))
        with pytest.raises(KernelLeakError, match="do not remove the kernel"):
            estimators.estimate_constant_p2(_config("korn_full_bc", points=4, max_iter=3))
        return

    def test_monotone_in_gamma(self) -> None:
        constants = [
            estimators.estimate(_config(inequality, points=6, gamma=gamma)).constant_estimate
            for inequality, gamma in [
                ("korn_partial_bc", "+x1"),
                ("korn_partial_bc", "+x1,-x2"),
                ("korn_full_bc", None),
            ]
        ]
        assert constants[0] >= constants[1] * (1 - 1e-8)
        assert constants[1] >= constants[2] * (1 - 1e-8)
        return

    def test_refinement_stability(self) -> None:
        coarse = estimators.estimate_constant_p2(_config("korn_full_bc", points=9)).lambda_min
        fine = estimators.estimate_constant_p2(_config("korn_full_bc", points=17)).lambda_min
        assert 0.75 <= fine / coarse <= 1 / 0.75
        return

    def test_quotient_at_p2(self) -> None:
        report = estimators.estimate_constant_p2(_config("korn_quotient", points=5))
        assert report.lambda_min > 0
        assert report.sum_form_bracket[0] < report.sum_form_bracket[1]
        return


class TestAscentRoute:
    def test_consistent_with_eigen_route(self) -> None:
        cfg = _config("korn_full_bc", points=5, n_starts=3, max_iter=200)
        eigen = estimators.estimate_constant_p2(cfg)
        report = estimators.estimate_constant_lp(cfg)
        assert report.route == "ascent"
        assert report.lower_bound
        assert report.start_labels[0] == "eigenvector"
        low, high = eigen.sum_form_bracket
        np.testing.assert_allclose(report.lambda_min, eigen.lambda_min, rtol=1e-12)
        # never above the quadratic-form constant, never below the value at the eigenvector
        assert report.constant_estimate <= high * (1 + 1e-10)
        assert report.constant_estimate >= eigen.sum_form_value * (1 - 1e-12)
        assert report.constant_estimate >= low
        return

    def test_certificate(self) -> None:
        cfg = _config("korn_partial_bc", points=5, p=3, gamma="-x1", n_starts=3, max_iter=100)
        report = estimators.estimate_constant_lp(cfg)
        problem = estimators.build_problem(cfg)
        np.testing.assert_allclose(problem.ratio(report.minimizer, 3), report.constant_estimate, rtol=1e-12)
        P = report.minimizer_snapshot
        value = lp_norm(P, 3, cfg.grid.weights) / estimators.rhs_functional(cfg.grid, P, 3)
        np.testing.assert_allclose(value, report.constant_estimate, rtol=1e-12)
        for scale in (0.1, 10.0):
            np.testing.assert_allclose(
                problem.ratio(scale * report.minimizer, 3), report.constant_estimate, rtol=1e-12
            )
        assert np.all(np.diff(report.trace) >= 0)
        np.testing.assert_allclose(report.quotient_value * report.constant_estimate, 1.0, rtol=1e-14)
        assert report.lambda_min is None
        assert report.constant_estimate == max(report.start_values)
        return

    @pytest.mark.parametrize(
        "inequality,gamma",
        [
            ("korn_full_bc", None),
            ("korn_partial_bc", "-x1"),
            ("korn_quotient", None),
            ("tangential_korn", "all"),
            ("poincare_skew", "+x1"),
        ],
    )
    def test_certificate_for_every_inequality(self, inequality, gamma) -> None:
        cfg = _config(inequality, points=5, p=3, gamma=gamma, n_starts=2, max_iter=40)
        report = estimators.estimate_constant_lp(cfg)
        problem = estimators.build_problem(cfg)
        # the quotient is invariant under scaling of the field
        for scale in (1.0, 0.1, 10.0):
            np.testing.assert_allclose(
                problem.ratio(scale * report.minimizer, 3), report.constant_estimate, rtol=1e-10
            )
        assert len(report.trace) >= 1
        assert np.all(np.diff(report.trace) >= 0)
        assert all(value <= report.constant_estimate for value in report.start_values)
        return

    def test_deterministic(self, monkeypatch) -> None:
        cfg = _config("poincare_skew", points=5, p=1.5, gamma="+x1", n_starts=4, max_iter=50)
        monkeypatch.setenv("KORNLAB_THREADS", "1")
        first = estimators.estimate(cfg)
        monkeypatch.setenv("KORNLAB_THREADS", "4")
        second = estimators.estimate(cfg)
        assert first.constant_estimate == second.constant_estimate
        assert first.start_values == second.start_values
        assert first.best_start == second.best_start
        assert len(first.start_labels) == 4
        return

    def test_quotient(self) -> None:
        cfg = _config("korn_quotient", points=4, p=3, n_starts=2, max_iter=30)
        report = estimators.estimate_quotient_constant(cfg)
        assert report.lower_bound
        assert report.constant_estimate > 0
        assert np.isfinite(report.constant_estimate)
        with pytest.raises(ValueError, match="not supported"):
            estimators.estimate_quotient_constant(_config("korn_full_bc"))
        return


class TestCorollaries:
    @pytest.mark.parametrize("p", [2.0, 3.0])
    def test_tangential_korn_at_least_one(self, p) -> None:
        cfg = _config("tangential_korn", points=5, p=p, gamma="all", n_starts=2, max_iter=50)
        report = estimators.tangential_korn_constant(cfg)
        assert report.constant_estimate >= 1 - 1e-10
        assert report.route == ("eigen" if p == 2 else "ascent")
        if p == 2:
            assert report.sum_form_bracket == (report.constant_estimate, report.constant_estimate)
        with pytest.raises(ValueError, match="not supported"):
            estimators.tangential_korn_constant(_config("poincare_skew", gamma="+x1"))
        return

    def test_poincare_reduces_to_scalar(self) -> None:
        grid = build_grid(2, (1.0, 2.0), (6, 7))
        cfg = EstimatorConfig("poincare_skew", grid, gamma="-x1,+x2")
        skew = estimators.poincare_skew_constant(cfg).constant_estimate
        scalar = estimators.scalar_poincare_constant(grid, "-x1,+x2")
        np.testing.assert_allclose(skew, scalar, rtol=1e-10)
        return

    @pytest.mark.parametrize("inequality", ["tangential_korn", "poincare_skew"])
    def test_monotone_in_gamma(self, inequality) -> None:
        constants = [
            estimators.estimate(_config(inequality, points=8, gamma=gamma)).constant_estimate
            for gamma in ("-x1", "-x1,+x2", "all")
        ]
        assert np.all(np.isfinite(constants))
        # more constrained faces, smaller admissible class
        assert constants[0] >= constants[1] * (1 - 1e-8)
        assert constants[1] >= constants[2] * (1 - 1e-8)
        return

    def test_poincare_single_face(self) -> None:
        grid = build_grid(2, points_per_axis=8)
        skew = estimators.poincare_skew_constant(EstimatorConfig("poincare_skew", grid, gamma="-x1"))
        scalar = estimators.scalar_poincare_constant(grid, "-x1")
        np.testing.assert_allclose(skew.constant_estimate, scalar, rtol=1e-10)
        return

    def test_scalar_poincare_lp(self) -> None:
        grid = build_grid(2, points_per_axis=5)
        value = estimators.scalar_poincare_constant(grid, "all", p=3, n_starts=2, max_iter=50)
        assert 0 < value < np.inf
        return

    def test_dispatch(self) -> None:
        assert estimators.estimate(_config("poincare_skew", points=4, gamma="all")).route == "eigen"
        cfg = _config("korn_partial_bc", points=4, p=1.5, gamma="+x2", n_starts=2, max_iter=20)
        report = estimators.estimate(cfg)
        assert report.route == "ascent"
        return
