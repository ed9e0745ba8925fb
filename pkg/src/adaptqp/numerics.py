"""Dense linear algebra for the vec / U / v algebra of the transform step.

``vec`` is row-major throughout: ``vec(W)`` concatenates the rows of ``W``.
Under that convention ``vec(W)^T U(x) vec(W) = ||W x||^2`` with ``U(x)`` the
block-diagonal matrix of ``M_S`` copies of ``x x^T``, and the system matrix
``V = I + D * sum_ij y_ij U(x_i)`` is ``blockdiag(B, ..., B)``.  Production
code only ever forms the ``M_T x M_T`` block ``B``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .core import InvalidArgumentError, PairWeights
from .validation import check_matrix, check_symmetric, check_vector


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky breakdown; ``pivot`` is the 0-based index of the failing pivot."""

    def __init__(self, pivot):
        super().__init__(f"matrix is not positive definite (non-positive pivot at index {pivot})")
        self.pivot = pivot


def vec(W):
    return np.ascontiguousarray(W, dtype=float).reshape(-1)


def unvec(w, m_s, m_t):
    w = np.asarray(w, dtype=float)
    if w.size != m_s * m_t:
        raise InvalidArgumentError(f"vector of length {w.size} cannot be reshaped to {m_s}x{m_t}")
    return w.reshape(m_s, m_t).copy()


def build_U(x, m_s):
    """Block-diagonal ``(m_s*M_T)^2`` matrix with ``m_s`` copies of ``x x^T``."""
    x = check_vector(x, "x")
    if m_s < 1:
        raise InvalidArgumentError("m_s must be >= 1")
    return np.kron(np.eye(m_s), np.outer(x, x))


def build_v(x_s, x_t):
    """Row-major ``vec(x_s x_t^T)``, so ``v . vec(W) = x_s^T W x_t``."""
    return np.outer(check_vector(x_s, "x_s"), check_vector(x_t, "x_t")).reshape(-1)


@dataclass(frozen=True, eq=False)
class SpdFactorization:
    dim: int
    factor: np.ndarray  # lower-triangular Cholesky factor


def spd_factorize(B, sym_tol=1e-10) -> SpdFactorization:
    """Unpivoted Cholesky factorization ``B = L L^T``."""
    B = check_symmetric(check_matrix(B, "B"), "B", sym_tol)
    L, info = lapack.dpotrf(B, lower=1, clean=1)
    if info > 0:
        raise FactorizationError(info - 1)
    if info < 0:
        raise InvalidArgumentError(f"dpotrf rejected argument {-info}")
    L.setflags(write=False)
    return SpdFactorization(B.shape[0], L)


def spd_solve(f: SpdFactorization, rhs):
    """Solve ``B x = rhs`` for a vector or for each column of a matrix."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != f.dim:
        raise InvalidArgumentError(f"rhs has {rhs.shape[0]} rows, factorization has dim {f.dim}")
    x, info = lapack.dpotrs(f.factor, rhs, lower=1)
    if info != 0:
        raise InvalidArgumentError(f"dpotrs rejected argument {-info}")
    return x


def compute_V_block(targets, pair_weights: PairWeights, d_weight):
    """``B = I + D * sum_i c_i x_i x_i^T`` with ``c_i`` the pair-weight row sums."""
    X = check_matrix(targets, "targets")
    if d_weight < 0:
        raise InvalidArgumentError("d_weight must be >= 0")
    B = np.eye(X.shape[1])
    if d_weight == 0:
        return B
    c = pair_weights.row_sums
    if c.shape[0] != X.shape[0]:
        raise InvalidArgumentError(
            f"pair weights have {c.shape[0]} rows for {X.shape[0]} target samples")
    B += d_weight * (X.T * c) @ X
    # symmetrize away round-off so the block factorizes as an exact SPD matrix
    return 0.5 * (B + B.T)


def compute_P(sources, targets, pair_weights: PairWeights):
    """``P = sum_ij y_ij x_j^s (x_i^t)^T``, the matrix whose row-major vec is ``sum y_ij v_ij``."""
    Xs = check_matrix(sources, "sources")
    Xt = check_matrix(targets, "targets")
    Y = pair_weights.weights
    if Y.shape != (Xt.shape[0], Xs.shape[0]):
        raise InvalidArgumentError(
            f"pair weights shaped {Y.shape}, expected {(Xt.shape[0], Xs.shape[0])}")
    return Xs.T @ (Y.T @ Xt)
