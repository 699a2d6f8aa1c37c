"""Input checks shared by the estimators."""
from __future__ import annotations

import numpy as np

from .returns import N_CLASSES

N_FEATURES = 5


def check_samples(X, dtype=np.float32, n_features: int = N_FEATURES) -> np.ndarray:
    """Validate a (n_samples, n_points, n_features) batch of finite values."""
    X = np.asarray(X)
    if dtype is not None:
        X = X.astype(dtype, copy=False)
    elif not np.issubdtype(X.dtype, np.floating):
        X = X.astype(np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError(f"expected a 3-d array (samples, points, features), got shape {X.shape}")
    if X.shape[2] != n_features:
        raise ValueError(f"expected {n_features} features per point, got {X.shape[2]}")
    if X.shape[1] < 1:
        raise ValueError("samples must contain at least one point")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains NaN or infinite values")
    return X


def check_labels(y, shape=None, n_classes: int = N_CLASSES) -> np.ndarray:
    """Validate class codes in ``1..n_classes``; optionally enforce ``shape``."""
    y = np.asarray(y)
    if shape is not None and y.shape != tuple(shape):
        raise ValueError(f"labels have shape {y.shape}, expected {tuple(shape)}")
    if y.size and (not np.issubdtype(y.dtype, np.integer) and not np.all(y == np.round(y))):
        raise ValueError("labels must be integers")
    y = y.astype(np.int64)
    if y.size and (y.min() < 1 or y.max() > n_classes):
        raise ValueError(f"labels must lie in 1..{n_classes}")
    return y


def check_point_features(X, n_features: int = N_FEATURES) -> np.ndarray:
    """Validate a flat (n_points, n_features) matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(f"expected shape (n, {n_features}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains NaN or infinite values")
    return X
