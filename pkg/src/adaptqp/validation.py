"""Input validation helpers shared by the solvers and estimators."""
import numpy as np

from .core import InvalidArgumentError


def check_matrix(a, name="matrix", shape=None):
    """Return ``a`` as a finite 2-D float array, optionally of a fixed shape."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-D, got shape {a.shape}")
    if shape is not None:
        for got, want, axis in zip(a.shape, shape, ("rows", "columns")):
            if want is not None and got != want:
                raise InvalidArgumentError(f"{name} has {got} {axis}, expected {want}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return a


def check_vector(a, name="vector", size=None):
    a = np.asarray(a, dtype=float)
    if a.ndim != 1:
        raise InvalidArgumentError(f"{name} must be 1-D, got shape {a.shape}")
    if size is not None and a.shape[0] != size:
        raise InvalidArgumentError(f"{name} has length {a.shape[0]}, expected {size}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return a


def check_symmetric(a, name="matrix", tol=1e-10):
    """Raise unless ``a`` is square and symmetric to ``tol`` (relative to its scale)."""
    if a.shape[0] != a.shape[1]:
        raise InvalidArgumentError(f"{name} must be square, got {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    asym = float(np.max(np.abs(a - a.T), initial=0.0))
    if asym > tol * scale:
        raise InvalidArgumentError(f"{name} is not symmetric (max asymmetry {asym:.3g})")
    return a


def check_positive_int(value, name):
    if int(value) != value or value < 1:
        raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
