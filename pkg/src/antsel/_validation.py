"""Input validation helpers shared across the package.

These are deliberately small and strict: every public entry point funnels its
array arguments through one of them, so shape and dtype errors surface with a
consistent message instead of somewhere deep in a numpy kernel.
"""

from __future__ import annotations

import numpy as np

_SEED_BOUND = 2**64


def as_entries(X, *, check_finite: bool = True) -> np.ndarray:
    """Return the complex (n_users, n_antennas, n_subcarriers) array behind X.

    Accepts either a bare 3-D array-like or any object exposing an
    ``entries`` attribute (such as ChannelTensor).
    """
    entries = getattr(X, "entries", X)
    entries = np.asarray(entries)
    if entries.ndim != 3:
        raise ValueError(
            f"channel data must be a 3-D (users, antennas, subcarriers) array, got ndim={entries.ndim}"
        )
    entries = entries.astype(np.complex128, copy=False)
    if check_finite and not np.isfinite(entries).all():
        raise ValueError("channel entries must all be finite")
    return entries


def check_point(point, *, name: str = "point") -> np.ndarray:
    """Validate one 3-D coordinate, returned as float64 of shape (3,)."""
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (3,):
        raise ValueError(f"{name} must be a 3-D coordinate, got shape {p.shape}")
    if not np.isfinite(p).all():
        raise ValueError(f"{name} must be finite")
    return p


def check_positions(points, *, name: str = "positions", allow_empty: bool = False) -> np.ndarray:
    """Validate an (N, 3) coordinate array, returned as float64."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {arr.shape}")
    if not allow_empty and arr.shape[0] == 0:
        raise ValueError(f"{name} must not be empty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} must be finite")
    return arr


def check_mask(mask, n_antennas: int, *, name: str = "mask") -> np.ndarray:
    """Validate an on/off flag vector over the antenna axis."""
    arr = np.asarray(mask)
    if arr.ndim != 1 or arr.shape[0] != n_antennas:
        raise ValueError(f"{name} must be a length-{n_antennas} vector, got shape {arr.shape}")
    if arr.dtype != np.bool_:
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"{name} must be boolean (or 0/1 integers), got dtype {arr.dtype}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} integer values must be 0 or 1")
        arr = arr.astype(bool)
    return arr


def check_subcarriers(subcarriers, n_subcarriers: int) -> np.ndarray:
    """Validate a subcarrier index list; returns the indices sorted ascending.

    Sorting fixes the accumulation order of per-subcarrier averages, which
    keeps results bit-identical under permuted inputs.
    """
    idx = np.asarray(subcarriers)
    if idx.size == 0:
        raise ValueError("subcarrier list must not be empty")
    if idx.ndim != 1 or not np.issubdtype(idx.dtype, np.integer):
        raise ValueError("subcarriers must be a 1-D integer index list")
    idx = idx.astype(np.intp)
    if idx.min() < 0 or idx.max() >= n_subcarriers:
        raise ValueError(f"subcarrier indices must lie in [0, {n_subcarriers})")
    idx = np.sort(idx)
    if np.any(idx[1:] == idx[:-1]):
        raise ValueError("subcarrier indices must be distinct")
    return idx


def check_seed(seed, *, name: str = "seed") -> int:
    """Validate an unsigned 64-bit RNG seed."""
    if not isinstance(seed, (int, np.integer)):
        raise ValueError(f"{name} must be an integer, got {type(seed).__name__}")
    value = int(seed)
    if not 0 <= value < _SEED_BOUND:
        raise ValueError(f"{name} must lie in [0, 2**64)")
    return value


def check_count(value, *, name: str, minimum: int = 0, maximum: int | None = None) -> int:
    """Validate an integer count within [minimum, maximum]."""
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ValueError(f"{name} must be <= {maximum}, got {value}")
    return value


def check_positive_scalar(value, *, name: str) -> float:
    """Validate a finite, strictly positive real scalar."""
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be a finite positive number, got {value}")
    return value
