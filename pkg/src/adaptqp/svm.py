"""One-vs-rest linear SVMs with exact bias and per-sample penalties.

Decision values follow ``theta_k' x + b_k``.  Each binary problem is solved in
its dual (with the ``sum_i a_i y_i = 0`` constraint that pins the bias) by SMO.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._kernels import smo
from .core import DegenerateProblemError, InvalidArgumentError, binarize_labels
from .validation import check_matrix, check_vector


@dataclass(frozen=True, eq=False)
class SvmModel:
    thetas: np.ndarray  # (K, M_S), row k is the normal of class k
    biases: np.ndarray  # (K,)

    def __post_init__(self):
        T = check_matrix(self.thetas, "thetas")
        b = check_vector(self.biases, "biases", T.shape[0])
        if T.shape[0] < 2:
            raise InvalidArgumentError("an SvmModel needs at least two classes")
        T.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "thetas", T)
        object.__setattr__(self, "biases", b)

    @property
    def n_classes(self):
        return self.thetas.shape[0]

    @property
    def dim(self):
        return self.thetas.shape[1]


SMO_BUDGET = 50  # pair updates per sample before switching to the interior point


def _low_rank_factor(K):
    w, V = np.linalg.eigh(K)
    keep = w > w.max() * 1e-12
    return V[:, keep] * np.sqrt(w[keep])


def _dual_interior_point(F, y, c, tol=1e-10, max_iter=100):
    """Primal-dual interior point for the biased dual with ``Q = diag(y) F F' diag(y)``.

    Each Newton system ``(Q + Sigma) da + y dnu = h`` is solved through the
    Woodbury identity, so an iteration costs ``O(n r^2)`` for a rank-``r``
    factor.  Returns the last iterate, which lies strictly inside the box.
    """
    n, r = F.shape
    Z = F * y[:, None]
    a = 0.5 * c
    nu = 0.0
    zl = np.ones(n)
    zu = np.ones(n)
    eye = np.eye(r)
    scale = 1.0 + np.max(np.sum(Z * Z, axis=1)) * np.max(c)
    for _ in range(max_iter):
        u = c - a
        rd = Z @ (Z.T @ a) - 1.0 + nu * y - zl + zu
        re = y @ a
        mu = (a @ zl + u @ zu) / (2 * n)
        if max(np.abs(rd).max(), abs(re)) < tol * scale and mu < tol * np.mean(c):
            return a
        sig = zl / a + zu / u
        si = 1.0 / sig
        G = eye + Z.T @ (Z * si[:, None])
        try:
            Gf = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            return a

        def solve(v):
            t = np.linalg.solve(Gf.T, np.linalg.solve(Gf, Z.T @ (si * v)))
            return si * v - si * (Z @ t)

        My = solve(y)
        yMy = y @ My

        def newton(rl, ru):
            Mh = solve(-rd + rl / a - ru / u)
            dnu = (y @ Mh + re) / yMy
            da = Mh - dnu * My
            return da, dnu, (rl - zl * da) / a, (ru + zu * da) / u

        da, dnu, dzl, dzu = newton(-a * zl, -u * zu)
        al = _max_step(a, da, zl, dzl, u, -da, zu, dzu)
        mu_aff = ((a + al * da) @ (zl + al * dzl) + (u - al * da) @ (zu + al * dzu)) / (2 * n)
        target = (mu_aff / mu) ** 3 * mu
        da, dnu, dzl, dzu = newton(target - a * zl - da * dzl, target - u * zu + da * dzu)
        al = 0.995 * _max_step(a, da, zl, dzl, u, -da, zu, dzu)
        a_new = a + al * da
        u_new = c - a_new
        if not (np.all(a_new > 0) and np.all(u_new > 0) and np.isfinite(dnu)):
            return a
        a = a_new
        nu += al * dnu
        zl = zl + al * dzl
        zu = zu + al * dzu
    return a


def _max_step(*pairs):
    step = 1.0
    for v, dv in zip(pairs[::2], pairs[1::2]):
        neg = dv < 0
        if np.any(neg):
            step = min(step, float(np.min(-v[neg] / dv[neg])))
    return step


def _round_to_feasible(a, y, c):
    """Snap near-bound values onto the box and restore ``y'a = 0`` on free variables."""
    a = np.clip(a, 0.0, c)
    a[a < 1e-9 * c] = 0.0
    a[a > (1 - 1e-9) * c] = c[a > (1 - 1e-9) * c]
    for _ in range(3):
        r = y @ a
        if r == 0.0:
            break
        free = (a > 0) & (a < c)
        if not np.any(free):
            free = np.ones_like(a, dtype=bool)
        # move each free a_i by -r y_i / |F| and clip; repeat if clipping bit
        a[free] = np.clip(a[free] - r * y[free] / free.sum(), 0.0, c[free])
    return a


def train_binary(K, y, c, tol=1e-6, max_iter=None, features=None):
    """Dual SMO for one signed problem on a precomputed Gram matrix.

    SMO runs first.  If it has not converged after ``SMO_BUDGET`` updates per
    sample (large effective penalties make it crawl), an interior-point solve
    on a low-rank factor of ``K`` (``features`` when given) supplies a warm
    start and SMO resumes from there.

    Returns ``(alpha, bias, gap)``; ``gap`` is the maximal KKT violation at exit.
    """
    n = y.shape[0]
    y = y.astype(float)
    if max_iter is None:
        max_iter = 10_000 * n
    first = min(int(max_iter), SMO_BUDGET * n)
    alpha, rho, it, gap = smo(K, y, c, float(tol), first, np.zeros(n))
    if gap <= tol or it >= max_iter:
        return alpha, -rho, gap
    F = features if features is not None and features.shape[1] < n else _low_rank_factor(K)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = _dual_interior_point(np.asarray(F, dtype=float), y, c)
    alpha = _round_to_feasible(a, y, c)
    alpha, rho, _, gap = smo(K, y, c, float(tol), int(max_iter) - it, alpha)
    return alpha, -rho, gap


def train_ovr(features, labels, per_sample_c, n_classes=None, tol=1e-6, max_iter=None) -> SvmModel:
    """Train one ``(theta_k, b_k)`` per class against the rest.

    Each minimizes ``0.5 ||theta||^2 + sum_i c_i hinge(y_ik (theta' x_i + b))``
    with ``y_ik = +1`` for class k and ``-1`` otherwise.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise InvalidArgumentError(f"features must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("features contain non-finite values")
    labels = np.asarray(labels)
    c = check_vector(per_sample_c, "per_sample_c", X.shape[0])
    if labels.shape != (X.shape[0],):
        raise InvalidArgumentError("labels must have one entry per feature row")
    if np.any(c <= 0):
        raise InvalidArgumentError("per-sample penalties must be positive")
    if np.unique(labels).size < 2:
        raise DegenerateProblemError("training data contains a single class")
    K = int(labels.max()) if n_classes is None else int(n_classes)

    gram = X @ X.T
    thetas = np.empty((K, X.shape[1]))
    biases = np.empty(K)
    for k in range(1, K + 1):
        if K == 2 and k == 2:
            # the class-2 dual is the class-1 dual with y negated: same alphas
            thetas[1], biases[1] = -thetas[0], -biases[0]
            break
        y = binarize_labels(labels, k, K)
        alpha, b, _ = train_binary(gram, y, c, tol, max_iter, X)
        thetas[k - 1] = (alpha * y) @ X
        biases[k - 1] = b
    return SvmModel(thetas, biases)


def decision_values(model: SvmModel, x):
    """``theta_k' x + b_k`` for a single sample (1-D) or each row of a matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.dim:
        raise InvalidArgumentError(
            f"feature dimension {x.shape[-1]} does not match model dimension {model.dim}")
    return x @ model.thetas.T + model.biases


def predict(model: SvmModel, x):
    """Argmax class id (1-based); exact ties go to the smallest id."""
    return np.argmax(decision_values(model, x), axis=-1) + 1


def hinge_objective(model: SvmModel, k, X, labels, c):
    """Primal objective of the class-``k`` problem (1-based ``k``)."""
    y = binarize_labels(labels, k, model.n_classes)
    m = y * (X @ model.thetas[k - 1] + model.biases[k - 1])
    return 0.5 * model.thetas[k - 1] @ model.thetas[k - 1] + np.sum(c * np.maximum(0.0, 1.0 - m))


class OneVsRestLinearSVC(ClassifierMixin, BaseEstimator):
    """Linear one-vs-rest SVM classifier.

    Parameters
    ----------
    C : float, default=1.0
        Slack penalty; multiplied per sample by ``sample_weight`` in ``fit``.
    tol : float, default=1e-6
        Maximal KKT violation of each binary dual at termination.
    max_iter : int, optional
        SMO pair-update cap per binary problem (default ``10000 * n_samples``).

    Attributes
    ----------
    classes_ : ndarray of shape (n_classes,)
    model_ : SvmModel
    coef_ : ndarray of shape (n_classes, n_features)
    intercept_ : ndarray of shape (n_classes,)
    """

    def __init__(self, C=1.0, tol=1e-6, max_iter=None):
        self.C = C
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y)
        check_classification_targets(y)
        self.classes_, codes = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("OneVsRestLinearSVC needs samples of at least two classes")
        c = np.full(X.shape[0], float(self.C))
        if sample_weight is not None:
            c = c * np.asarray(sample_weight, dtype=float)
        keep = c > 0
        if np.unique(codes[keep]).size < 2:
            raise ValueError("positively weighted samples must span two classes")
        n_classes = self.classes_.size
        model = train_ovr(X[keep], codes[keep] + 1, c[keep], n_classes=max(n_classes, 2),
                          tol=self.tol, max_iter=self.max_iter)
        self.model_ = model
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def coef_(self):
        check_is_fitted(self, "model_")
        return np.asarray(self.model_.thetas)

    @property
    def intercept_(self):
        check_is_fitted(self, "model_")
        return np.asarray(self.model_.biases)

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        scores = decision_values(self.model_, X)
        if self.classes_.size == 2:
            # sklearn convention: positive score means classes_[1]
            return 0.5 * (scores[:, 1] - scores[:, 0])
        return scores

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.classes_[predict(self.model_, X) - 1]
