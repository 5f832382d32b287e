"""Input validation helpers shared by the estimators."""
from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


def as_1d_samples(X, allow_empty: bool = False) -> np.ndarray:
    """Coerce a list, 1-D array or single-column 2-D array to a float vector."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim == 0:
        arr = arr[None]
    if arr.ndim != 1:
        raise ValueError(f"expected one-dimensional samples, got shape {arr.shape}")
    if arr.size == 0:
        if allow_empty:
            return arr
        raise ValueError("no samples given")
    return check_array(arr[:, None], ensure_all_finite=True)[:, 0]


def check_states(X, n_features: int) -> np.ndarray:
    arr = check_array(X, dtype=np.float64, ensure_2d=False)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] != n_features:
        raise ValueError(f"expected {n_features} state features, got {arr.shape[1]}")
    return arr


def check_unit_interval(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return float(value)
