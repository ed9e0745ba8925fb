import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adaptqp.core import PairWeights, compute_pair_weights
from adaptqp.numerics import (FactorizationError, build_U, build_v, compute_P, compute_V_block,
                              spd_factorize, spd_solve, unvec, vec)
from adaptqp.oracle import materialize_full_V

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def mats(rows, cols):
    return arrays(float, (rows, cols), elements=finite)


class TestVec:
    def test_examples(self):
        np.testing.assert_array_equal(vec([[1, 2], [3, 4]]), [1, 2, 3, 4])
        np.testing.assert_array_equal(vec(np.eye(2)), [1, 0, 0, 1])
        np.testing.assert_array_equal(vec(np.zeros((3, 2))), np.zeros(6))

    @given(st.integers(1, 4).flatmap(lambda r: st.integers(1, 4).flatmap(lambda c: mats(r, c))))
    def test_roundtrip(self, W):
        np.testing.assert_array_equal(unvec(vec(W), *W.shape), W)


class TestU:
    def test_unit_vector(self):
        blk = np.array([[1.0, 0], [0, 0]])
        np.testing.assert_array_equal(build_U([1, 0], 2), np.kron(np.eye(2), blk))

    def test_zero(self):
        np.testing.assert_array_equal(build_U([0, 0], 3), np.zeros((6, 6)))

    def test_v_example(self):
        np.testing.assert_array_equal(build_v([1, 2], [3, 4]), [3, 4, 6, 8])
        np.testing.assert_array_equal(build_v([0, 0], [3, 4]), np.zeros(4))

    @given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 4))
    def test_vec_identities(self, seed, m_s, m_t):
        rng = np.random.default_rng(seed)
        W = rng.standard_normal((m_s, m_t))
        x_t, x_s, theta = rng.standard_normal(m_t), rng.standard_normal(m_s), rng.standard_normal(m_s)
        w = vec(W)
        assert abs(w @ build_U(x_t, m_s) @ w - np.sum((W @ x_t) ** 2)) <= 1e-12 * (1 + np.abs(w).sum() ** 2 * np.abs(x_t).sum() ** 2)
        assert abs(build_v(x_s, x_t) @ w - x_s @ W @ x_t) <= 1e-12 * (1 + np.abs(W).sum() * 16)
        assert abs(vec(np.outer(theta, x_t)) @ w - theta @ W @ x_t) <= 1e-12 * (1 + np.abs(W).sum() * 16)


class TestSpd:
    def test_identity(self):
        f = spd_factorize(np.eye(2))
        np.testing.assert_array_equal(spd_solve(f, [5.0, -3.0]), [5, -3])

    def test_diagonal(self):
        np.testing.assert_allclose(spd_solve(spd_factorize(np.diag([4.0, 9.0])), [4.0, 9.0]), [1, 1])

    def test_random_against_gaussian_elimination(self, rng):
        A = rng.standard_normal((6, 6))
        B = A @ A.T + 6 * np.eye(6)
        rhs = rng.standard_normal(6)
        f = spd_factorize(B)
        assert f.dim == 6
        L = f.factor
        assert np.allclose(L, np.tril(L)) and np.all(np.diag(L) > 0)
        np.testing.assert_allclose(L @ L.T, B, rtol=1e-10, atol=1e-10 * np.abs(B).max())
        x = spd_solve(f, rhs)
        assert np.linalg.norm(B @ x - rhs) <= 1e-8 * np.linalg.norm(rhs)
        np.testing.assert_allclose(x, np.linalg.solve(B, rhs), rtol=1e-8, atol=1e-12)

    def test_not_positive_definite_names_pivot(self):
        B = np.diag([1.0, 2.0, -1.0])
        with pytest.raises(FactorizationError) as err:
            spd_factorize(B)
        assert err.value.pivot == 2
        assert "index 2" in str(err.value)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            spd_factorize(np.array([[2.0, 1.0], [0.0, 2.0]]))


class TestVBlock:
    def test_zero_distance_weight(self, rng):
        pw = compute_pair_weights([1, 2], [1, 2, 2])
        np.testing.assert_array_equal(compute_V_block(rng.standard_normal((3, 4)), pw, 0.0), np.eye(4))

    def test_single_target(self):
        pw = PairWeights(np.array([[1.0]]))
        np.testing.assert_array_equal(compute_V_block(np.array([[1.0, 0.0]]), pw, 1.0), [[2, 0], [0, 1]])

    def test_against_full_V(self, rng):
        X = rng.standard_normal((4, 3))
        pw = compute_pair_weights(rng.integers(1, 3, 5), [1, 2, 1, 2])
        B = compute_V_block(X, pw, 0.7)
        V = materialize_full_V(X, pw, 0.7, 3)
        assert np.max(np.abs(np.kron(np.eye(3), B) - V)) <= 1e-12

    @given(st.integers(0, 10**6), st.floats(0, 100))
    def test_symmetric_and_dominates_identity(self, seed, d):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((5, 3))
        pw = compute_pair_weights(rng.integers(1, 3, 4), rng.integers(1, 3, 5))
        B = compute_V_block(X, pw, d)
        np.testing.assert_array_equal(B, B.T)
        spd_factorize(B)
        z = rng.standard_normal(3)
        assert z @ B @ z >= z @ z * (1 - 1e-12)

    def test_P(self, rng):
        Xs, Xt = rng.standard_normal((5, 2)), rng.standard_normal((3, 4))
        pw = compute_pair_weights(rng.integers(1, 3, 5), [1, 2, 2])
        P = compute_P(Xs, Xt, pw)
        ref = sum(pw.weights[i, j] * np.outer(Xs[j], Xt[i]) for i in range(3) for j in range(5))
        np.testing.assert_allclose(P, ref, atol=1e-12)
