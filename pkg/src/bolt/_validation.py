"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, ValidationError


def check_points(X, dim=3, name="points", allow_empty=True):
    """Return ``X`` as a C-contiguous float64 array of shape (n, dim)."""
    arr = np.ascontiguousarray(X, dtype=np.float64)
    if arr.ndim == 1 and arr.size == dim:
        arr = arr.reshape(1, dim)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValidationError(f"{name} must have shape (n, {dim}), got {arr.shape}")
    if not allow_empty and arr.shape[0] == 0:
        raise ValidationError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_triangles(T, n_vertices, name="triangles"):
    arr = np.asarray(T)
    if arr.size == 0:
        return np.zeros((0, 3), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValidationError(f"{name} must have shape (m, 3), got {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValidationError(f"{name} must contain integer indices")
    arr = np.ascontiguousarray(arr, dtype=np.int64)
    bad = np.flatnonzero((arr < 0).any(axis=1) | (arr >= n_vertices).any(axis=1))
    if bad.size:
        raise ValidationError(
            f"{name}: triangle {int(bad[0])} has index out of range [0, {n_vertices})"
        )
    return arr


def check_positive(value, name, strict=True):
    v = float(value)
    if not np.isfinite(v) or (v <= 0 if strict else v < 0):
        raise ConfigurationError(f"{name} must be {'>' if strict else '>='} 0, got {value}")
    return v


def check_is_fitted(estimator, attributes):
    """Raise ``sklearn.exceptions.NotFittedError`` when ``attributes`` are missing."""
    from sklearn.exceptions import NotFittedError

    if isinstance(attributes, str):
        attributes = [attributes]
    if not all(hasattr(estimator, a) for a in attributes):
        raise NotFittedError(
            f"This {type(estimator).__name__} instance is not fitted yet; call 'fit' first."
        )
