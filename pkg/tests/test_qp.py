import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptqp._kernels import box_cd
from adaptqp.core import InvalidArgumentError
from adaptqp.qp import (BoxQp, InequalityQp, InfeasibleError, solve_box_qp,
                        solve_inequality_qp)


def kkt_residual(p, a):
    grad = p.hessian @ a + p.linear
    return np.max(np.abs(np.clip(a - grad, p.lower, p.upper) - a))


def random_box_qp(seed, n=5, rank=None):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((rank or n, n))
    return BoxQp(A.T @ A, rng.standard_normal(n) * 3, -rng.uniform(0, 2, n), rng.uniform(0, 2, n))


def as_inequality(p):
    eye = np.eye(p.n)
    return InequalityQp(p.hessian, p.linear, np.vstack([eye, -eye]),
                        np.concatenate([p.lower, -p.upper]))


class TestBoxQp:
    def test_interior_optimum(self):
        a, obj, res = solve_box_qp(BoxQp([[1.0]], [-1.0], [0.0], [10.0]))
        assert a[0] == pytest.approx(1.0) and obj == pytest.approx(-0.5) and res <= 1e-6

    def test_clipped_optimum(self):
        a, obj, _ = solve_box_qp(BoxQp([[1.0]], [-1.0], [0.0], [0.5]))
        assert a[0] == 0.5 and obj == pytest.approx(0.5 * 0.25 - 0.5)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_general_solver(self, seed):
        p = random_box_qp(seed)
        res = solve_box_qp(p, tol=1e-9)
        ref = solve_inequality_qp(as_inequality(p))
        assert res.converged
        assert abs(res.objective - ref.objective) <= 1e-6

    def test_zero_curvature_moves_to_bound(self):
        p = BoxQp(np.zeros((3, 3)), [1.0, -2.0, 0.0], [-1.0, -1.0, -1.0], [1.0, 1.0, 1.0])
        res = solve_box_qp(p, x0=[0.0, 0.0, 0.3])
        np.testing.assert_array_equal(res.x, [-1.0, 1.0, 0.3])

    def test_zero_curvature_needs_finite_bounds(self):
        with pytest.raises(InvalidArgumentError):
            solve_box_qp(BoxQp([[0.0]], [1.0], [-np.inf], [1.0]))

    def test_non_symmetric_rejected(self):
        with pytest.raises(InvalidArgumentError):
            BoxQp([[1.0, 0.5], [0.0, 1.0]], [0, 0], 0, 1)

    def test_bad_bounds_rejected(self):
        with pytest.raises(InvalidArgumentError):
            BoxQp([[1.0]], [0.0], [1.0], [0.0])

    def test_sweep_cap_reports_non_converged(self):
        p = random_box_qp(3, n=30, rank=4)
        res = solve_box_qp(p, tol=1e-14, max_sweeps=1, fallback=False)
        assert not res.converged and res.sweeps == 1
        assert np.all(res.x >= p.lower) and np.all(res.x <= p.upper)

    def test_rank_deficient_converges(self):
        # low-rank Hessians are where plain coordinate descent stalls
        p = random_box_qp(7, n=120, rank=6)
        res = solve_box_qp(p, tol=1e-8)
        assert res.converged and kkt_residual(p, res.x) <= 1e-8

    @given(st.integers(0, 10**6), st.integers(1, 12))
    def test_bounds_exact_and_residual(self, seed, n):
        p = random_box_qp(seed, n=n, rank=max(1, n // 2))
        res = solve_box_qp(p, tol=1e-7)
        assert np.all(res.x >= p.lower) and np.all(res.x <= p.upper)
        if res.converged:
            assert kkt_residual(p, res.x) <= 1e-7
        assert res.objective == pytest.approx(p.objective(res.x))

    @given(st.integers(0, 10**6))
    def test_objective_non_increasing_across_sweeps(self, seed):
        p = random_box_qp(seed, n=8, rank=5)
        a = np.clip(np.zeros(p.n), p.lower, p.upper)
        prev = p.objective(a)
        for _ in range(15):
            box_cd(p.hessian, p.linear, p.lower, p.upper, a, 1e-300, 1)
            cur = p.objective(a)
            assert cur <= prev + 1e-12 * max(1.0, abs(prev))
            prev = cur

    def test_fallback_never_worse(self):
        p = random_box_qp(11, n=60, rank=5)
        plain = solve_box_qp(p, tol=1e-12, max_sweeps=300, fallback=False)
        full = solve_box_qp(p, tol=1e-12, max_sweeps=300)
        assert full.objective <= plain.objective + 1e-12


class TestInequalityQp:
    def test_active_constraint(self):
        z, obj = solve_inequality_qp(InequalityQp([[1.0]], [0.0], [[1.0]], [3.0]))
        assert z[0] == pytest.approx(3.0, abs=1e-7) and obj == pytest.approx(4.5, abs=1e-6)

    def test_unconstrained(self):
        z, obj = solve_inequality_qp(InequalityQp(np.eye(3), np.zeros(3)))
        np.testing.assert_allclose(z, 0, atol=1e-12)

    def test_nonneg_mask(self):
        res = solve_inequality_qp(InequalityQp(np.eye(2), [1.0, -1.0], nonneg=[True, False]))
        np.testing.assert_allclose(res.x, [0.0, 1.0], atol=1e-7)
        assert res.converged

    def test_kkt_postconditions(self, rng):
        n, m = 6, 9
        A = rng.standard_normal((n, n))
        G = rng.standard_normal((m, n))
        p = InequalityQp(A @ A.T, rng.standard_normal(n), G, G @ rng.standard_normal(n) - 1.0)
        res = solve_inequality_qp(p, tol=1e-9)
        assert res.converged
        for key in ("stationarity", "feasibility", "complementarity"):
            assert res.residuals[key] <= 1e-7

    def test_infeasible(self):
        p = InequalityQp(np.eye(1), [0.0], [[1.0], [-1.0]], [1.0, 0.0])  # z >= 1 and z <= 0
        with pytest.raises(InfeasibleError):
            solve_inequality_qp(p, max_iter=200)
