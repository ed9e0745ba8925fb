"""Domain data model shared by every other module.

Labels are dense 1-based class ids ``1..K``.  Arrays held by the types below
are copied on construction and flagged read-only so instances can be shared
between workers.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class InvalidArgumentError(ValueError):
    """Raised when an input violates a documented precondition."""


class DegenerateProblemError(InvalidArgumentError):
    """Raised when a learning problem has no meaningful solution (e.g. one class)."""


class CapacityError(RuntimeError):
    """Raised when a dense reference path would exceed its size guard."""


class Domain(str, enum.Enum):
    SOURCE = "source"
    TARGET = "target"


class PairWeighting(str, enum.Enum):
    """How the target/source pair weights of the distance term are built."""

    INDICATOR = "indicator"
    CLASS_NORMALIZED = "class-normalized"


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with integer class labels tagged by domain.

    Parameters
    ----------
    features : array-like of shape (n_samples, dim)
    labels : array-like of shape (n_samples,)
        Class ids in ``1..n_classes``.
    domain : Domain
    n_classes : int, optional
        Size of the class universe. Defaults to ``labels.max()``; must be >= 2.
    """

    features: np.ndarray
    labels: np.ndarray
    domain: Domain = Domain.SOURCE
    n_classes: int | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise InvalidArgumentError(f"features must be 2-D, got shape {X.shape}")
        if X.shape[1] < 1:
            raise InvalidArgumentError("features must have at least one column")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise InvalidArgumentError(
                f"labels length {y.shape} does not match {X.shape[0]} feature rows")
        if not np.all(np.isfinite(X)):
            bad = int(np.flatnonzero(~np.isfinite(X).all(axis=1))[0])
            raise InvalidArgumentError(f"non-finite value in feature row {bad}")
        if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
            raise InvalidArgumentError("labels must be integer class ids")
        y = y.astype(np.int64)
        k = self.n_classes if self.n_classes is not None else (int(y.max()) if y.size else 0)
        if k < 2:
            raise InvalidArgumentError(f"need at least 2 classes, got n_classes={k}")
        if y.size and (y.min() < 1 or y.max() > k):
            raise InvalidArgumentError(f"labels must lie in 1..{k}")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "domain", Domain(self.domain))
        object.__setattr__(self, "n_classes", int(k))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(self.features[index], self.labels[index], self.domain, self.n_classes)


@dataclass(frozen=True)
class HyperParams:
    """Penalties and outer-loop controls.

    ``qp_tol`` is the projected-gradient tolerance of the W-step dual solve.
    """

    c_source: float = 1.0
    c_target: float = 1.0
    d_weight: float = 1.0
    max_outer_iters: int = 5
    w_tol: float = 1e-3
    qp_tol: float = 1e-8

    def __post_init__(self):
        if not self.c_source > 0:
            raise InvalidArgumentError(f"c_source must be > 0, got {self.c_source}")
        if not self.c_target > 0:
            raise InvalidArgumentError(f"c_target must be > 0, got {self.c_target}")
        if not self.d_weight >= 0:
            raise InvalidArgumentError(f"d_weight must be >= 0, got {self.d_weight}")
        if int(self.max_outer_iters) < 1:
            raise InvalidArgumentError("max_outer_iters must be a positive integer")
        if not self.w_tol > 0:
            raise InvalidArgumentError(f"w_tol must be > 0, got {self.w_tol}")
        if not self.qp_tol > 0:
            raise InvalidArgumentError(f"qp_tol must be > 0, got {self.qp_tol}")


@dataclass(frozen=True, eq=False)
class PairWeights:
    """Non-negative n_T x n_S weights between target and source samples."""

    weights: np.ndarray
    row_sums: np.ndarray = field(default=None)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2:
            raise InvalidArgumentError("pair weights must be a 2-D matrix")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidArgumentError("pair weights must be finite and non-negative")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "row_sums", _frozen(w.sum(axis=1)))

    @property
    def shape(self):
        return self.weights.shape


def _check_class_vector(labels, name="labels"):
    y = np.asarray(labels)
    if y.ndim != 1:
        raise InvalidArgumentError(f"{name} must be a 1-D vector")
    if y.size == 0:
        raise InvalidArgumentError(f"{name} is empty")
    if not np.all(np.equal(np.mod(y, 1), 0)) or y.min() < 1:
        raise InvalidArgumentError(f"{name} must be positive integer class ids")
    return y.astype(np.int64)


def binarize_labels(labels, k, n_classes=None):
    """One-vs-rest signs: +1 where ``labels == k`` and -1 elsewhere."""
    y = _check_class_vector(labels)
    K = int(y.max()) if n_classes is None else int(n_classes)
    if not 1 <= k <= K:
        raise InvalidArgumentError(f"class id {k} outside 1..{K}")
    return np.where(y == k, 1.0, -1.0)


def compute_pair_weights(source_labels, target_labels,
                         mode=PairWeighting.CLASS_NORMALIZED) -> PairWeights:
    """Class-matched weights between every target sample i and source sample j.

    ``INDICATOR`` puts 1 on same-class pairs.  ``CLASS_NORMALIZED`` puts
    ``1 / (n_T^(k) * n_S^(k))`` on same-class pairs of class k, so each class
    present in both domains contributes total weight 1.
    """
    ys = _check_class_vector(source_labels, "source labels")
    yt = _check_class_vector(target_labels, "target labels")
    mode = PairWeighting(mode)
    same = (yt[:, None] == ys[None, :]).astype(float)
    if mode is PairWeighting.CLASS_NORMALIZED:
        n_t = np.array([np.count_nonzero(yt == c) for c in yt], dtype=float)
        n_s = np.array([np.count_nonzero(ys == c) for c in yt], dtype=float)
        denom = np.where(n_s > 0, n_t * n_s, 1.0)
        same /= denom[:, None]
    return PairWeights(same)
