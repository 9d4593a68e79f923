"""Bilinear resampling in float64.

Hand-rolled rather than delegated so down/up resizing is deterministic across
platforms and stays in 64-bit end to end. Uses half-pixel centers (the
convention of most image libraries): source coordinate of output pixel i is
(i + 0.5) * scale - 0.5, clamped to the valid range (edge replication).
"""

from __future__ import annotations

import numpy as np

from .validation import ValidationError, check_frame


def _axis_weights(out_size: int, in_size: int):
    """Left neighbor index and right-neighbor weight per output position."""
    scale = in_size / out_size
    x = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    x = np.clip(x, 0.0, in_size - 1)
    lo = np.minimum(x.astype(np.int64), in_size - 2) if in_size > 1 else np.zeros(out_size, np.int64)
    w = x - lo
    return lo, w


def resize_bilinear(frame, out_h: int, out_w: int) -> np.ndarray:
    """Resize (h, w, 3) to (out_h, out_w, 3)."""
    frame = check_frame(frame)
    h, w = frame.shape[:2]
    if out_h < 1 or out_w < 1:
        raise ValidationError(f"output size must be positive, got {(out_h, out_w)}")
    if (out_h, out_w) == (h, w):
        return frame.copy()
    yi, wy = _axis_weights(out_h, h)
    xi, wx = _axis_weights(out_w, w)
    # Interpolate rows first, then columns.
    top = frame[yi]  # (out_h, w, 3)
    bot = frame[np.minimum(yi + 1, h - 1)]
    rows = top + wy[:, None, None] * (bot - top)
    left = rows[:, xi]
    right = rows[:, np.minimum(xi + 1, w - 1)]
    return left + wx[None, :, None] * (right - left)


def resize_by_factor(frame, factor: float) -> np.ndarray:
    """Scale both dimensions by ``factor`` (rounded, min size 1)."""
    frame = check_frame(frame)
    if not (factor > 0):
        raise ValidationError(f"resize factor must be positive, got {factor}")
    h, w = frame.shape[:2]
    out_h = max(1, int(round(h * factor)))
    out_w = max(1, int(round(w * factor)))
    return resize_bilinear(frame, out_h, out_w)
