"""Input checks shared by the estimator classes and the CLI."""

from __future__ import annotations

import numpy as np


def check_snapshot(z, n_virtual: int | None = None) -> np.ndarray:
    """Return ``z`` as a finite 1-D complex array, optionally of length ``n_virtual``."""
    arr = np.asarray(z)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D snapshot, got shape {arr.shape}")
    if not (np.issubdtype(arr.dtype, np.number) or arr.dtype == bool):
        raise TypeError(f"snapshot must be numeric, got dtype {arr.dtype}")
    arr = arr.astype(complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError("snapshot contains NaN or infinite entries")
    if n_virtual is not None and arr.size != n_virtual:
        raise ValueError(f"snapshot must have length {n_virtual}, got {arr.size}")
    return arr


def check_snapshots(Z, n_virtual: int | None = None) -> np.ndarray:
    """Return a 2-D complex array with one snapshot per row.

    A single 1-D snapshot is promoted to one row.
    """
    arr = np.asarray(Z)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected snapshots of shape (n, M), got {arr.shape}")
    return np.stack([check_snapshot(row, n_virtual) for row in arr]) if arr.shape[0] else \
        np.zeros((0, arr.shape[1]), dtype=complex)


def check_probability(p: float, name: str = "probability") -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {p}")
    return p
