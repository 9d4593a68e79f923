"""Quality scorer implementations.

A scorer is any callable mapping a batch of frames (b, h, w, 3) to per-frame
scores in [0,1]. No pretrained model ships here: real VQA/CLIP-IQA values
arrive through score files, and tests use the deterministic stubs.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..io import ScoreFile
from ..validation import ValidationError


class ConstScorer:
    """Same score for every frame."""

    def __init__(self, value: float):
        if not (0.0 <= value <= 1.0):
            raise ValidationError(f"score must lie in [0,1], got {value}")
        self.value = float(value)

    def __call__(self, frames) -> np.ndarray:
        frames = np.asarray(frames)
        return np.full(frames.shape[0], self.value)


class FileScorer:
    """Broadcasts an externally computed per-clip probability to every frame.

    ``field`` selects the main probability ("p") or an auxiliary index 0-10.
    """

    def __init__(self, score_file: ScoreFile, clip_id: str, field="p"):
        if clip_id not in score_file.scores:
            raise ValidationError(f"no score entry for clip_id {clip_id!r}")
        entry = score_file.scores[clip_id]
        if field == "p":
            self.value = float(entry.p)
        else:
            idx = int(field)
            if not (0 <= idx < 11):
                raise ValidationError(f"aux index must be 0..10, got {idx}")
            self.value = float(entry.aux[idx])

    def __call__(self, frames) -> np.ndarray:
        frames = np.asarray(frames)
        return np.full(frames.shape[0], self.value)


class HashScorer:
    """Deterministic pseudo-score derived from the frame bytes. Useful for
    exercising plumbing without any model: same frame, same score, always."""

    def __init__(self, salt: int = 0):
        self.salt = int(salt)

    def __call__(self, frames) -> np.ndarray:
        frames = np.asarray(frames, dtype=np.float64)
        out = np.empty(frames.shape[0])
        for i, f in enumerate(frames):
            h = hashlib.sha256()
            h.update(str(self.salt).encode())
            h.update(np.ascontiguousarray(f).tobytes())
            out[i] = int.from_bytes(h.digest()[:8], "big") / 2.0 ** 64
        return out


class MeanLumaScorer:
    """Scores a frame by its mean Rec.601 luma. A toy scorer whose gradient
    direction is obvious, handy for sanity checks."""

    def __call__(self, frames) -> np.ndarray:
        frames = np.asarray(frames, dtype=np.float64)
        luma = 0.299 * frames[..., 0] + 0.587 * frames[..., 1] + 0.114 * frames[..., 2]
        return np.clip(luma.mean(axis=(1, 2)), 0.0, 1.0)
