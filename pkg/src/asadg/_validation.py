"""Input validation shared by the estimators (thin wrappers over sklearn's)."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DimensionMismatch


def as_matrix(X, n_features=None, name="X", min_samples=1) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_samples=min_samples,
                    input_name=name)
    if n_features is not None and X.shape[1] != n_features:
        raise DimensionMismatch(f"{name} has {X.shape[1]} features, expected {n_features}")
    return X


def as_points(X, n_features, name="X"):
    """Accept one vector or a batch; return (2-d array, was_single)."""
    arr = np.asarray(X, dtype=float)
    single = arr.ndim == 1
    return as_matrix(arr.reshape(1, -1) if single else arr, n_features, name), single
