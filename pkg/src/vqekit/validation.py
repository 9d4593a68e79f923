"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


class ValidationError(ValueError):
    """An input violates a documented contract (maps to CLI exit code 1)."""


def check_frame(frame, name: str = "frame") -> np.ndarray:
    """Coerce *frame* to a float64 (h, w, 3) array and check finiteness."""
    arr = np.asarray(frame, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(f"{name} must have shape (h, w, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"{name} must be at least 1x1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_unit_range(arr: np.ndarray, name: str = "value") -> np.ndarray:
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValidationError(
            f"{name} outside [0, 1]: min={arr.min():.6g} max={arr.max():.6g}"
        )
    return arr


def check_frames_batch(frames, name: str = "frames") -> np.ndarray:
    """Coerce to (n, h, w, 3) float64; a single frame gains a batch axis."""
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[3] != 3:
        raise ValidationError(f"{name} must have shape (n, h, w, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "arrays") -> None:
    if a.shape != b.shape:
        raise ValidationError(f"{what} shape mismatch: {a.shape} vs {b.shape}")


def check_positive(value, name: str):
    if not value > 0:
        raise ValidationError(f"{name} must be > 0, got {value}")
    return value


def check_in(value, allowed, name: str):
    if value not in allowed:
        raise ValidationError(f"{name} must be one of {sorted(allowed)}, got {value!r}")
    return value
