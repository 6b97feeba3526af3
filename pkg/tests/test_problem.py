import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdflow.problem import (
    ProblemInstance,
    QuadraticObjective,
    SaddlePoint,
    augmented_lagrangian,
    grad_x_lagrangian,
    kkt_saddle_point,
    lipschitz_constant,
    load_problem,
    minimal_norm_solution,
    save_problem,
    spectral_norm,
)


def toy_instance(m=1.0, n=1.0, e=1.0, sigma=1.0):
    u = np.array([m, n, e], dtype=float)
    obj = QuadraticObjective(2.0 * np.outer(u, u), np.zeros(3))
    A = np.array([[m, -n, e]], dtype=float)
    return ProblemInstance(obj, A, np.zeros(1), sigma)


def fd_grad(p, x, lam, h=1e-6):
    g = np.zeros_like(x)
    for i in range(len(x)):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (augmented_lagrangian(p, xp, lam) - augmented_lagrangian(p, xm, lam)) / (2 * h)
    return g


class TestAugmentedLagrangian:
    def test_hand_value(self):
        p = toy_instance()
        x = np.array([1.0, 1.0, -1.0])
        # f = 1, <lam, Ax-b> = -1, penalty = 0.5
        assert augmented_lagrangian(p, x, np.array([1.0])) == pytest.approx(0.5, abs=1e-15)

    def test_zero_at_origin(self):
        p = toy_instance()
        assert augmented_lagrangian(p, np.zeros(3), np.array([7.0])) == 0.0

    def test_zero_on_solution_set(self):
        p = toy_instance()
        x = np.array([1.0, 0.0, -1.0])
        assert augmented_lagrangian(p, x, np.array([5.0])) == pytest.approx(0.0, abs=1e-15)

    def test_dimension_mismatch(self):
        p = toy_instance()
        with pytest.raises(ValueError):
            augmented_lagrangian(p, np.zeros(4), np.zeros(1))
        with pytest.raises(ValueError):
            augmented_lagrangian(p, np.zeros(3), np.zeros(2))


class TestGradient:
    def test_zero_at_saddle(self):
        p = toy_instance()
        g = grad_x_lagrangian(p, np.zeros(3), np.zeros(1))
        assert np.all(g == 0.0)

    def test_fixture_value(self):
        p = toy_instance()
        x = np.array([1.0, 1.0, -1.0])
        lam = np.array([1.0])
        g = grad_x_lagrangian(p, x, lam)
        np.testing.assert_allclose(g, [2.0, 2.0, 2.0], atol=1e-14)
        np.testing.assert_allclose(g, fd_grad(p, x, lam), atol=1e-6)

    def test_matches_finite_differences_random(self):
        rng = np.random.default_rng(3)
        R = rng.standard_normal((6, 6))
        obj = QuadraticObjective(R.T @ R, rng.standard_normal(6))
        A = rng.standard_normal((2, 6))
        p = ProblemInstance(obj, A, A @ rng.standard_normal(6), 0.7)
        for _ in range(10):
            x = rng.standard_normal(6)
            lam = rng.standard_normal(2)
            g = grad_x_lagrangian(p, x, lam)
            np.testing.assert_allclose(g, fd_grad(p, x, lam), rtol=1e-5, atol=1e-5)


class TestKKT:
    def test_hand_solved_system(self):
        # 2x1 + lam = 0, 2x2 = 0, x1 = 1  ->  x = (1, 0), lam = -2
        q = QuadraticObjective(2.0 * np.eye(2), np.zeros(2))
        sp = kkt_saddle_point(q, np.array([[1.0, 0.0]]), np.array([1.0]))
        np.testing.assert_allclose(sp.primal, [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(sp.dual, [-2.0], atol=1e-12)

    def test_origin_when_unconstrained_optimum_feasible(self):
        q = QuadraticObjective(np.eye(3), np.zeros(3))
        sp = kkt_saddle_point(q, np.array([[1.0, 2.0, 2.0]]), np.zeros(1))
        np.testing.assert_allclose(sp.primal, np.zeros(3), atol=1e-12)
        np.testing.assert_allclose(sp.dual, np.zeros(1), atol=1e-12)

    def test_random_instance_residuals(self):
        rng = np.random.default_rng(11)
        R = rng.standard_normal((8, 8))
        M = R.T @ R
        obj = QuadraticObjective(M, rng.standard_normal(8))
        A = rng.standard_normal((5, 8))
        b = rng.random(5)
        sp = kkt_saddle_point(obj, A, b)
        assert np.linalg.norm(M @ sp.primal + obj.linear + A.T @ sp.dual) <= 1e-8
        assert np.linalg.norm(A @ sp.primal - b) <= 1e-8

    def test_inconsistent_system_raises(self):
        q = QuadraticObjective(np.zeros((2, 2)), np.array([1.0, 0.0]))
        # grad f = (1, 0) constant, A^T lam can only point along (1, 1):
        # stationarity is unsolvable
        A = np.array([[1.0, 1.0]])
        with pytest.raises(np.linalg.LinAlgError):
            kkt_saddle_point(q, A, np.array([0.0]))


class TestMinimalNorm:
    def test_toy_is_origin(self):
        p = toy_instance()
        hint = kkt_saddle_point(p.objective, p.constraint_matrix, p.constraint_rhs)
        xs = minimal_norm_solution(p, hint)
        np.testing.assert_allclose(xs, np.zeros(3), atol=1e-10)

    def test_unique_solution_equals_kkt_primal(self):
        rng = np.random.default_rng(4)
        R = rng.standard_normal((6, 6))
        obj = QuadraticObjective(R.T @ R, rng.standard_normal(6))
        A = rng.standard_normal((3, 6))
        p = ProblemInstance(obj, A, rng.random(3), 1.0)
        hint = kkt_saddle_point(obj, A, p.constraint_rhs)
        xs = minimal_norm_solution(p, hint)
        np.testing.assert_allclose(xs, hint.primal, atol=1e-8)

    def test_degenerate_line_matches_brute_force(self):
        # solution set is {(x1, 0, -2x1)}; 1-d scan of ||x|| has minimum 0
        p = toy_instance(m=2.0, n=1.0, e=1.0)
        hint = kkt_saddle_point(p.objective, p.constraint_matrix, p.constraint_rhs)
        xs = minimal_norm_solution(p, hint)
        grid = np.linspace(-3.0, 3.0, 2001)
        norms = [np.linalg.norm([g, 0.0, -2.0 * g]) for g in grid]
        best = grid[int(np.argmin(norms))]
        np.testing.assert_allclose(xs, [best, 0.0, -2.0 * best], atol=1e-8)
        assert np.linalg.norm(xs) <= min(norms) + 1e-8

    def test_minimal_over_sampled_solution_set(self):
        p = toy_instance()
        hint = kkt_saddle_point(p.objective, p.constraint_matrix, p.constraint_rhs)
        xs = minimal_norm_solution(p, hint)
        for s in np.linspace(-2, 2, 17):
            member = np.array([s, 0.0, -s])
            assert np.linalg.norm(xs) <= np.linalg.norm(member) + 1e-8


class TestLipschitz:
    def test_rank_one(self):
        u = np.array([1.0, 1.0, 1.0])
        q = QuadraticObjective(2.0 * np.outer(u, u), np.zeros(3))
        assert lipschitz_constant(q) == pytest.approx(6.0, rel=1e-9)

    def test_zero_matrix(self):
        q = QuadraticObjective(np.zeros((3, 3)), np.zeros(3))
        assert lipschitz_constant(q) == 0.0

    def test_diagonal(self):
        q = QuadraticObjective(np.diag([1.0, 4.0, 9.0]), np.zeros(3))
        assert lipschitz_constant(q) == pytest.approx(9.0, rel=1e-9)

    def test_matches_dense_eigensolve(self):
        rng = np.random.default_rng(5)
        R = rng.standard_normal((12, 12))
        M = R.T @ R
        q = QuadraticObjective(M, np.zeros(12))
        assert lipschitz_constant(q) == pytest.approx(np.linalg.eigvalsh(M)[-1], rel=1e-8)

    def test_bounds_gradient_ratio(self):
        rng = np.random.default_rng(6)
        R = rng.standard_normal((7, 7))
        M = R.T @ R
        q = QuadraticObjective(M, rng.standard_normal(7))
        L = lipschitz_constant(q)
        for _ in range(20):
            x, y = rng.standard_normal(7), rng.standard_normal(7)
            ratio = np.linalg.norm(M @ x - M @ y) / np.linalg.norm(x - y)
            assert L >= ratio - 1e-8

    def test_spectral_norm_rectangular(self):
        rng = np.random.default_rng(8)
        A = rng.standard_normal((4, 9))
        want = np.linalg.svd(A, compute_uv=False)[0]
        assert spectral_norm(A) == pytest.approx(want, rel=1e-8)


class TestValidation:
    def test_negative_penalty_rejected(self):
        u = np.ones(3)
        obj = QuadraticObjective(np.outer(u, u), np.zeros(3))
        with pytest.raises(ValueError):
            ProblemInstance(obj, np.array([[1.0, -1.0, 1.0]]), np.zeros(1), -0.5)

    def test_asymmetric_hessian_rejected(self):
        M = np.array([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            QuadraticObjective(M, np.zeros(2))

    def test_indefinite_hessian_rejected(self):
        with pytest.raises(ValueError):
            QuadraticObjective(np.diag([1.0, -1.0]), np.zeros(2))

    def test_infeasible_constraints_rejected(self):
        obj = QuadraticObjective(np.eye(2), np.zeros(2))
        A = np.array([[1.0, 0.0], [1.0, 0.0]])
        b = np.array([0.0, 1.0])
        with pytest.raises(ValueError):
            ProblemInstance(obj, A, b, 1.0)

    def test_shape_mismatch_rejected(self):
        obj = QuadraticObjective(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError):
            ProblemInstance(obj, np.array([[1.0, 0.0, 0.0]]), np.zeros(1), 1.0)

    def test_saddle_point_invariants(self):
        p = toy_instance()
        with pytest.raises(ValueError):
            SaddlePoint.checked(np.array([1.0, 1.0, 1.0]), np.zeros(1), p)


class TestSaddleProperty:
    def test_gap_nonnegative_at_random_points(self):
        rng = np.random.default_rng(13)
        R = rng.standard_normal((6, 6))
        obj = QuadraticObjective(R.T @ R, rng.standard_normal(6))
        A = rng.standard_normal((3, 6))
        p = ProblemInstance(obj, A, rng.random(3), 1.0)
        sp = kkt_saddle_point(obj, A, p.constraint_rhs)
        base = augmented_lagrangian(p, sp.primal, sp.dual)
        for _ in range(100):
            x = rng.standard_normal(6) * 3.0
            assert augmented_lagrangian(p, x, sp.dual) - base >= -1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_gradient_consistency_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    m = int(rng.integers(1, n))
    R = rng.standard_normal((n, n))
    obj = QuadraticObjective(R.T @ R, rng.standard_normal(n))
    A = rng.standard_normal((m, n))
    p = ProblemInstance(obj, A, A @ rng.standard_normal(n), float(rng.random()))
    x = rng.standard_normal(n)
    lam = rng.standard_normal(m)
    g = grad_x_lagrangian(p, x, lam)
    np.testing.assert_allclose(g, fd_grad(p, x, lam), rtol=1e-5, atol=2e-5)


class TestProblemFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(17)
        R = rng.standard_normal((4, 4))
        obj = QuadraticObjective(R.T @ R, rng.standard_normal(4))
        A = rng.standard_normal((2, 4))
        p = ProblemInstance(obj, A, A @ rng.standard_normal(4), 0.25)
        path = tmp_path / "problem.txt"
        save_problem(p, path)
        p2 = load_problem(path)
        np.testing.assert_array_equal(p.objective.hessian, p2.objective.hessian)
        np.testing.assert_array_equal(p.objective.linear, p2.objective.linear)
        np.testing.assert_array_equal(p.constraint_matrix, p2.constraint_matrix)
        np.testing.assert_array_equal(p.constraint_rhs, p2.constraint_rhs)
        assert p.penalty == p2.penalty

    def test_missing_key_rejected(self, tmp_path):
        path = tmp_path / "broken.txt"
        path.write_text("n = 2\nm = 1\nsigma = 1\nM = 1 0 0 1\nq = 0 0\nA = 1 0\n")
        with pytest.raises(ValueError):
            load_problem(path)
