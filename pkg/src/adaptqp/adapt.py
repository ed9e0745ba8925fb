"""Max-margin domain transfer: transform steps, dual construction and the outer loop.

The transform ``W`` maps target features into the source feature space.  With
the classifiers ``(theta_k, b_k)`` fixed, the transform step solves

    min_W  0.5 ||W||_F^2 + C_T sum_ik xi_ik + 0.5 D sum_ij y_ij ||W x_i^t - x_j^s||^2
    s.t.   y_ik (theta_k' W x_i^t + b_k) >= 1 - xi_ik,   xi_ik >= 0

(``D = 0`` gives the plain MMDT step).  The dual has one box-bounded variable
``a_ik in [0, C_T]`` per hinge constraint and only needs the ``M_T x M_T``
block ``B = I + D sum_i c_i x_i x_i'`` of the system matrix; the transform is
recovered as ``W = (sum_ik a_ik y_ik theta_k x_i' + D P) B^-1``.
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import (CapacityError, Dataset, Domain, HyperParams, InvalidArgumentError,
                   PairWeighting, PairWeights, compute_pair_weights)
from .numerics import (SpdFactorization, compute_P, compute_V_block, spd_factorize,
                       spd_solve)
from .qp import BoxQp, InequalityQp, solve_box_qp, solve_inequality_qp
from .svm import SvmModel, decision_values, predict, train_ovr

logger = logging.getLogger(__name__)

PRIMAL_MAX_VARIABLES = 20_000


class Method(str, enum.Enum):
    MMDT = "mmdt"
    MMDTL2 = "mmdtl2"


@dataclass(frozen=True, eq=False)
class TransformMatrix:
    """``M_S x M_T`` map (``M_S x (M_T+1)`` when ``augmented``: last column is a bias)."""

    w: np.ndarray
    augmented: bool = False

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim != 2 or not np.all(np.isfinite(w)):
            raise InvalidArgumentError("transform must be a finite 2-D matrix")
        if self.augmented and w.shape[1] < 2:
            raise InvalidArgumentError("augmented transform needs at least one feature column")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "augmented", bool(self.augmented))

    @property
    def source_dim(self):
        return self.w.shape[0]

    @property
    def target_dim(self):
        return self.w.shape[1] - int(self.augmented)

    @classmethod
    def zeros(cls, source_dim, target_dim, augmented=False):
        return cls(np.zeros((source_dim, target_dim + int(augmented))), augmented)


def augment(X):
    X = np.asarray(X, dtype=float)
    return np.concatenate([X, np.ones(X.shape[:-1] + (1,))], axis=-1)


def apply_transform(T: TransformMatrix, x):
    """``W x`` (or ``W (x; 1)`` for augmented transforms) for a sample or each row."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != T.target_dim:
        raise InvalidArgumentError(
            f"target feature dimension {x.shape[-1]} does not match transform ({T.target_dim})")
    if T.augmented:
        x = augment(x)
    return x @ T.w.T


@dataclass(frozen=True, eq=False)
class DualSystem:
    """Coefficients of the transform-step dual.

    ``gram_x[i, j] = x_i' B^-1 x_j``, ``gram_theta = Theta Theta'``,
    ``linear_base[i, k] = theta_k' P B^-1 x_i``, ``signs[i, k] = y_ik``.
    ``constant`` is the part of the dual objective that does not depend on
    ``a`` so that ``dual_value(a)`` is directly comparable to the primal optimum.
    """

    gram_x: np.ndarray
    gram_theta: np.ndarray
    linear_base: np.ndarray
    b_factor: SpdFactorization
    p_matrix: np.ndarray
    signs: np.ndarray
    features: np.ndarray  # target features as used (augmented if applicable)
    d_weight: float
    augmented: bool
    constant: float

    def dual_value(self, qp: BoxQp, a):
        """Dual objective in maximization form, including constants."""
        return -qp.objective(a) + self.constant


def target_signs(labels, n_classes):
    labels = np.asarray(labels)
    return np.where(labels[:, None] == np.arange(1, n_classes + 1)[None, :], 1.0, -1.0)


def _step_inputs(source, target, model, pw, augmented, d_weight):
    if not isinstance(target, Dataset):
        raise InvalidArgumentError("target must be a Dataset")
    Xt = augment(target.features) if augmented else np.asarray(target.features)
    if d_weight > 0:
        if source is None or pw is None:
            raise InvalidArgumentError("the distance term needs source data and pair weights")
        if source.dim != model.dim:
            raise InvalidArgumentError(
                f"model dimension {model.dim} does not match source dimension {source.dim}")
        if pw.shape != (target.n_samples, source.n_samples):
            raise InvalidArgumentError(
                f"pair weights shaped {pw.shape}, expected {(target.n_samples, source.n_samples)}")
    if target.labels.max() > model.n_classes:
        raise InvalidArgumentError("target labels exceed the model's class count")
    return Xt


def _source_sq_norm_term(source, pw):
    # sum_ij y_ij ||x_j^s||^2
    col = pw.weights.sum(axis=0)
    return float(col @ np.einsum("ij,ij->i", source.features, source.features))


def mmdtl2_build_dual(source, target, model: SvmModel, pw: PairWeights | None, hp: HyperParams,
                      augmented=False):
    """Assemble the dual coefficients and the box QP (minimization form).

    Variables are ordered ``(i, k)`` row-major: index ``i * K + k``.  The QP is
    ``min 0.5 a'Ha + g'a`` with ``H[(i,k1),(j,k2)] = y_ik1 y_jk2 (theta_k1'theta_k2)
    (x_i' B^-1 x_j)`` and ``g_ik = -(1 - y_ik b_k - D y_ik theta_k' P B^-1 x_i)``,
    bounded by ``0 <= a <= C_T``.
    """
    D = float(hp.d_weight)
    Xt = _step_inputs(source, target, model, pw, augmented, D)
    n_t, m_t = Xt.shape
    K = model.n_classes
    T = model.thetas

    B = compute_V_block(Xt, pw, D)
    fac = spd_factorize(B)
    binv_xt = spd_solve(fac, Xt.T)  # (M_T, n_T)
    gram_x = Xt @ binv_xt
    gram_x = 0.5 * (gram_x + gram_x.T)
    gram_theta = T @ T.T
    if D > 0:
        P = compute_P(source.features, Xt, pw)
        linear_base = ((T @ P) @ binv_xt).T
        p_binv = spd_solve(fac, P.T).T
        constant = -0.5 * D * D * float(np.sum(P * p_binv)) + 0.5 * D * _source_sq_norm_term(source, pw)
    else:
        P = np.zeros((model.dim, m_t))
        linear_base = np.zeros((n_t, K))
        constant = 0.0
    Y = target_signs(target.labels, K)

    y = Y.reshape(-1)
    H = np.kron(gram_x, gram_theta) * np.outer(y, y)
    H = 0.5 * (H + H.T)
    g = -(1.0 - Y * model.biases[None, :] - D * Y * linear_base).reshape(-1)
    qp = BoxQp(H, g, np.zeros(n_t * K), np.full(n_t * K, float(hp.c_target)))
    ds = DualSystem(gram_x, gram_theta, linear_base, fac, P, Y, Xt, D, bool(augmented), constant)
    return ds, qp


def mmdtl2_recover_w(ds: DualSystem, a, model: SvmModel) -> TransformMatrix:
    """``W = (sum_ik a_ik y_ik theta_k x_i' + D P) B^-1``."""
    a = np.asarray(a, dtype=float)
    if a.size != ds.signs.size:
        raise InvalidArgumentError(f"dual vector has {a.size} entries, expected {ds.signs.size}")
    AY = a.reshape(ds.signs.shape) * ds.signs
    M = model.thetas.T @ (AY.T @ ds.features)
    if ds.d_weight > 0:
        M = M + ds.d_weight * ds.p_matrix
    W = spd_solve(ds.b_factor, M.T).T
    return TransformMatrix(W, ds.augmented)


class WStepResult(NamedTuple):
    transform: TransformMatrix
    dual: np.ndarray
    system: DualSystem
    qp: BoxQp
    converged: bool


def mmdtl2_w_step(source, target, model, pw, hp, augmented=False, x0=None) -> WStepResult:
    """Transform step through the dual: build, solve the box QP, recover ``W``."""
    ds, qp = mmdtl2_build_dual(source, target, model, pw, hp, augmented)
    res = solve_box_qp(qp, tol=hp.qp_tol, x0=x0)
    return WStepResult(mmdtl2_recover_w(ds, res.x, model), res.x, ds, qp, res.converged)


def mmdt_w_step(target, model, hp, augmented=True, x0=None) -> WStepResult:
    """MMDT transform step: the distance-free (``D = 0``) special case."""
    hp0 = HyperParams(hp.c_source, hp.c_target, 0.0, hp.max_outer_iters, hp.w_tol, hp.qp_tol)
    return mmdtl2_w_step(None, target, model, None, hp0, augmented, x0)


def mmdtl2_build_primal(source, target, model, pw, hp, augmented=False):
    """Dense primal QP over ``z = (vec(W), xi)``; returns ``(InequalityQp, constant)``.

    ``constant = 0.5 D sum_ij y_ij ||x_j^s||^2`` is left out of the QP objective.
    """
    D = float(hp.d_weight)
    Xt = _step_inputs(source, target, model, pw, augmented, D)
    n_t, m_t = Xt.shape
    m_s, K = model.dim, model.n_classes
    nw, nxi = m_s * m_t, n_t * K
    if nw + nxi > PRIMAL_MAX_VARIABLES:
        raise CapacityError(
            f"primal QP would have {nw + nxi} variables (limit {PRIMAL_MAX_VARIABLES}); "
            "use the dual path")
    n = nw + nxi
    H = np.zeros((n, n))
    f = np.zeros(n)
    H[:nw, :nw] = np.eye(nw)
    constant = 0.0
    if D > 0:
        S = (Xt.T * pw.row_sums) @ Xt
        H[:nw, :nw] += D * np.kron(np.eye(m_s), S)
        # -D sum_ij y_ij vec(x_j^s x_i^t')
        f[:nw] = -D * np.einsum("ij,jm,in->mn", pw.weights, source.features, Xt).reshape(-1)
        constant = 0.5 * D * _source_sq_norm_term(source, pw)
    f[nw:] = hp.c_target

    Y = target_signs(target.labels, K)
    A = np.zeros((nxi, n))
    for i in range(n_t):
        for k in range(K):
            r = i * K + k
            A[r, :nw] = Y[i, k] * np.outer(model.thetas[k], Xt[i]).reshape(-1)
            A[r, nw + r] = 1.0
    b = 1.0 - (Y * model.biases[None, :]).reshape(-1)
    nonneg = np.zeros(n, dtype=bool)
    nonneg[nw:] = True
    return InequalityQp(H, f, A, b, nonneg), constant


def mmdtl2_primal_w_step(source, target, model, pw, hp, augmented=False, tol=1e-9):
    qp, constant = mmdtl2_build_primal(source, target, model, pw, hp, augmented)
    res = solve_inequality_qp(qp, tol=tol)
    m_t = target.dim + int(augmented)
    W = res.x[:model.dim * m_t].reshape(model.dim, m_t)
    return TransformMatrix(W, augmented), res.objective + constant, res


def distance_term(W: TransformMatrix, source, target, pw):
    """``sum_ij y_ij ||W x_i^t - x_j^s||^2``."""
    Z = apply_transform(W, target.features)
    Xs = source.features
    Y = pw.weights
    return float(pw.row_sums @ np.einsum("ij,ij->i", Z, Z)
                 - 2.0 * np.sum(Y * (Z @ Xs.T))
                 + Y.sum(axis=0) @ np.einsum("ij,ij->i", Xs, Xs))


def target_hinge(W: TransformMatrix, target, model):
    """Optimal slacks ``xi_ik = max(0, 1 - y_ik (theta_k' W x_i + b_k))``, shape (n_T, K)."""
    Y = target_signs(target.labels, model.n_classes)
    margins = Y * decision_values(model, apply_transform(W, target.features))
    return np.maximum(0.0, 1.0 - margins)


def w_step_objective(W: TransformMatrix, source, target, model, pw, hp):
    """Transform-step objective at ``W`` with optimal slacks."""
    val = 0.5 * float(np.sum(W.w ** 2)) + hp.c_target * float(np.sum(target_hinge(W, target, model)))
    if hp.d_weight > 0:
        val += 0.5 * hp.d_weight * distance_term(W, source, target, pw)
    return val


def smooth_objective(W, source, target, pw, d_weight):
    """``0.5 ||W||_F^2 + 0.5 D sum_ij y_ij ||W x_i - x_j||^2`` for a raw matrix ``W``."""
    T = TransformMatrix(W)
    return 0.5 * float(np.sum(T.w ** 2)) + 0.5 * d_weight * distance_term(T, source, target, pw)


def smooth_gradient(W, source, target, pw, d_weight):
    """Gradient of :func:`smooth_objective`: ``W B - D P`` in matrix form."""
    W = np.asarray(W, dtype=float)
    Xt = target.features
    B = compute_V_block(Xt, pw, d_weight)
    G = W @ B
    if d_weight > 0:
        G -= d_weight * compute_P(source.features, Xt, pw)
    return G


def joint_objective(W, model, source, target, pw, hp):
    """Full joint objective: classifier terms on both domains plus the transform step terms."""
    Ys = target_signs(source.labels, model.n_classes)
    src_hinge = np.maximum(0.0, 1.0 - Ys * decision_values(model, source.features))
    return (w_step_objective(W, source, target, model, pw, hp)
            + 0.5 * float(np.sum(model.thetas ** 2))
            + hp.c_source * float(np.sum(src_hinge)))


class AlternationResult(NamedTuple):
    transform: TransformMatrix
    model: SvmModel
    trace: list
    n_iter: int
    converged: bool


def theta_step(source, target, W, hp, n_classes, svm_tol=1e-6):
    X = np.vstack([source.features, apply_transform(W, target.features)])
    labels = np.concatenate([source.labels, target.labels])
    c = np.concatenate([np.full(source.n_samples, hp.c_source),
                        np.full(target.n_samples, hp.c_target)])
    return train_ovr(X, labels, c, n_classes=n_classes, tol=svm_tol)


def alternate(source: Dataset, target: Dataset, hp: HyperParams, method=Method.MMDTL2,
              pair_weighting=PairWeighting.CLASS_NORMALIZED, augmented=None,
              pair_weights=None) -> AlternationResult:
    """Alternate classifier and transform estimation starting from ``W = 0``.

    Each iteration trains the one-vs-rest SVMs on the source rows (penalty
    ``C_S``) and the transformed target rows (penalty ``C_T``), then re-solves
    the transform.  Stops when ``||W_new - W_old||_F <= w_tol * max(1, ||W_old||_F)``
    or after ``max_outer_iters``.  ``trace`` holds the joint objective after
    every transform step.  MMDT defaults to an augmented (bias column)
    transform, MMDTL2 to a plain one.
    """
    method = Method(method)
    if augmented is None:
        augmented = method is Method.MMDT
    K = max(source.n_classes, target.n_classes)
    if method is Method.MMDTL2 or pair_weights is not None:
        pw = pair_weights if pair_weights is not None else compute_pair_weights(
            source.labels, target.labels, pair_weighting)
    else:
        pw = None
    W = TransformMatrix.zeros(source.dim, target.dim, augmented)
    trace = []
    obj_hp = hp if method is Method.MMDTL2 else _no_distance(hp)
    converged = False
    it = 0
    for it in range(1, int(hp.max_outer_iters) + 1):
        model = theta_step(source, target, W, hp, K)
        if method is Method.MMDT:
            W_new = mmdt_w_step(target, model, hp, augmented).transform
        else:
            W_new = mmdtl2_w_step(source, target, model, pw, hp, augmented).transform
        trace.append(joint_objective(W_new, model, source, target, pw, obj_hp))
        change = float(np.linalg.norm(W_new.w - W.w))
        old_norm = float(np.linalg.norm(W.w))
        logger.debug("outer iteration %d: objective %.6g, |dW| %.3g", it, trace[-1], change)
        W = W_new
        if change <= hp.w_tol * max(1.0, old_norm):
            converged = True
            break
    return AlternationResult(W, model, trace, it, converged)


def _no_distance(hp):
    return HyperParams(hp.c_source, hp.c_target, 0.0, hp.max_outer_iters, hp.w_tol, hp.qp_tol)


def model_to_json(transform: TransformMatrix, model: SvmModel) -> dict:
    """Single JSON document with explicit dims and row-major arrays."""
    return {
        "format": "adaptqp-model",
        "version": 1,
        "transform": {
            "rows": transform.w.shape[0],
            "cols": transform.w.shape[1],
            "augmented": transform.augmented,
            "data": transform.w.reshape(-1).tolist(),
        },
        "thetas": {
            "rows": model.thetas.shape[0],
            "cols": model.thetas.shape[1],
            "data": model.thetas.reshape(-1).tolist(),
        },
        "biases": model.biases.tolist(),
    }


def model_from_json(doc: dict):
    if doc.get("format") != "adaptqp-model":
        raise InvalidArgumentError("not an adaptqp model document")
    t, th = doc["transform"], doc["thetas"]
    W = np.asarray(t["data"], dtype=float).reshape(t["rows"], t["cols"])
    thetas = np.asarray(th["data"], dtype=float).reshape(th["rows"], th["cols"])
    return TransformMatrix(W, t["augmented"]), SvmModel(thetas, np.asarray(doc["biases"], float))


def save_model(path, transform, model):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(transform, model), fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_json(json.load(fh))


class MaxMarginTransfer(ClassifierMixin, BaseEstimator):
    """Jointly learn a target-to-source linear transform and one-vs-rest SVMs.

    ``fit`` takes labeled source and target samples.  ``transform`` maps target
    features into the source space, and ``predict``/``score`` classify target
    samples (pass ``domain="source"`` to classify source-space samples).

    Parameters
    ----------
    method : {"mmdtl2", "mmdt"}, default="mmdtl2"
        ``"mmdt"`` drops the distance term (``d_weight`` is ignored).
    c_source, c_target : float, default=1.0
        Slack penalties for source and target hinge losses.
    d_weight : float, default=1.0
        Weight of the pairwise distance term.
    max_outer_iters : int, default=5
    w_tol : float, default=1e-3
        Relative Frobenius change of ``W`` that stops the alternation.
    qp_tol : float, default=1e-8
    pair_weighting : {"class-normalized", "indicator"}, default="class-normalized"
    augmented : bool, optional
        Append a bias column to ``W``. Defaults to True for MMDT, False for MMDTL2.
    """

    def __init__(self, method="mmdtl2", c_source=1.0, c_target=1.0, d_weight=1.0,
                 max_outer_iters=5, w_tol=1e-3, qp_tol=1e-8,
                 pair_weighting="class-normalized", augmented=None):
        self.method = method
        self.c_source = c_source
        self.c_target = c_target
        self.d_weight = d_weight
        self.max_outer_iters = max_outer_iters
        self.w_tol = w_tol
        self.qp_tol = qp_tol
        self.pair_weighting = pair_weighting
        self.augmented = augmented

    def _hyperparams(self):
        return HyperParams(self.c_source, self.c_target, self.d_weight,
                           self.max_outer_iters, self.w_tol, self.qp_tol)

    def fit(self, X, y, X_target, y_target):
        X, y = check_X_y(X, y)
        X_target, y_target = check_X_y(X_target, y_target)
        self.classes_ = np.unique(np.concatenate([y, y_target]))
        if self.classes_.size < 2:
            raise ValueError("need samples of at least two classes")
        K = self.classes_.size
        source = Dataset(X, np.searchsorted(self.classes_, y) + 1, Domain.SOURCE, K)
        target = Dataset(X_target, np.searchsorted(self.classes_, y_target) + 1, Domain.TARGET, K)
        res = alternate(source, target, self._hyperparams(), Method(self.method),
                        PairWeighting(self.pair_weighting), self.augmented)
        self.transform_ = res.transform
        self.model_ = res.model
        self.trace_ = list(res.trace)
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        self.n_features_in_ = X.shape[1]
        self.n_target_features_in_ = X_target.shape[1]
        return self

    @property
    def W_(self):
        check_is_fitted(self, "transform_")
        return np.asarray(self.transform_.w)

    def transform(self, X):
        """Map target-domain samples into the source feature space."""
        check_is_fitted(self, "transform_")
        X = check_array(X)
        if X.shape[1] != self.n_target_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_target_features_in_}")
        return apply_transform(self.transform_, X)

    def _source_space(self, X, domain):
        if domain == "target":
            return self.transform(X)
        if domain == "source":
            check_is_fitted(self, "model_")
            X = check_array(X)
            if X.shape[1] != self.n_features_in_:
                raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
            return X
        raise ValueError(f"domain must be 'target' or 'source', got {domain!r}")

    def decision_function(self, X, domain="target"):
        return decision_values(self.model_, self._source_space(X, domain))

    def predict(self, X, domain="target"):
        return self.classes_[predict(self.model_, self._source_space(X, domain)) - 1]
