"""Input validation helpers shared by the estimator and the CLI paths."""

from __future__ import annotations

import numpy as np

from .exceptions import DataError


def check_occurrence_tensor(x, name="X"):
    """Validate a binary (regions, categories, slots) tensor; returns it as
    a float64 array."""
    arr = np.asarray(x)
    if arr.ndim != 3:
        raise DataError(
            f"{name} must be a 3-axis (regions, categories, slots) array, "
            f"got {arr.ndim} axes"
        )
    if arr.size == 0:
        raise DataError(f"{name} is empty")
    vals = np.asarray(arr, dtype=np.float64)
    if not np.isin(vals, (0.0, 1.0)).all():
        raise DataError(f"{name} must contain only 0/1 occurrence flags")
    return vals


def check_window(x, n_regions, n_categories, name="window"):
    """Validate a (N, C, K) or (B, N, C, K) window against fitted sizes."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim not in (3, 4):
        raise DataError(f"{name} must have 3 or 4 axes, got {arr.ndim}")
    shape = arr.shape if arr.ndim == 4 else (1,) + arr.shape
    if shape[1] != n_regions or shape[2] != n_categories:
        raise DataError(
            f"{name} has shape {arr.shape}, expected "
            f"(..., {n_regions}, {n_categories}, K)"
        )
    if shape[3] < 1:
        raise DataError(f"{name} needs at least one time slot")
    if not np.isin(arr, (0.0, 1.0)).all():
        raise DataError(f"{name} must contain only 0/1 occurrence flags")
    return arr


def check_graph_matrix(g, n_regions, name="graph"):
    """Validate a nonnegative square weight matrix; zeros its diagonal."""
    arr = np.asarray(g, dtype=np.float64)
    if arr.shape != (n_regions, n_regions):
        raise DataError(
            f"{name} has shape {arr.shape}, expected ({n_regions}, {n_regions})"
        )
    if (arr < 0).any():
        raise DataError(f"{name} weights must be nonnegative")
    out = arr.copy()
    np.fill_diagonal(out, 0.0)
    return out


def check_region_features(e, n_regions, name="region_embeddings"):
    """Validate a (N, D) pre-trained feature matrix."""
    arr = np.asarray(e, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != n_regions:
        raise DataError(
            f"{name} has shape {arr.shape}, expected ({n_regions}, D)"
        )
    if not np.isfinite(arr).all():
        raise DataError(f"{name} contains non-finite values")
    return arr
