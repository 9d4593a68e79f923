"""Loss terms for both stages plus the quality-loss composition.

Every pixel loss returns (value, gradient w.r.t. prediction). The quality loss
is value-only: scorers are black boxes (externally computed files or stubs),
so it feeds monitoring and the total-loss arithmetic, not backprop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from ..rand import seeded_rng
from ..validation import ValidationError

_COS_EPS = 1e-8
_CHARB_EPS = 1e-3


@dataclass
class LossWeights:
    lambda_quality: float = 0.75
    l1: float = 1.0
    cosine_color: float = 1.0
    l2: float = 1.0
    edge: float = 0.25
    proxy_perceptual: float = 0.0  # proxy for perceptual terms, off by default

    def __post_init__(self):
        for f in ("lambda_quality", "l1", "cosine_color", "l2", "edge", "proxy_perceptual"):
            if getattr(self, f) < 0:
                raise ValidationError(f"loss weight {f} must be >= 0")


def _check_pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValidationError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    return pred, target


def l1_loss(pred, target):
    pred, target = _check_pair(pred, target)
    d = pred - target
    value = float(np.mean(np.abs(d)))
    grad = np.sign(d) / d.size
    return value, grad


def l2_loss(pred, target):
    pred, target = _check_pair(pred, target)
    d = pred - target
    value = float(np.mean(d * d))
    grad = 2.0 * d / d.size
    return value, grad


def cosine_color_loss(pred, target):
    """Mean over pixels of 1 - cos(pred_rgb, target_rgb), eps-guarded so a
    pixel equal to its target (including black) contributes exactly 0."""
    pred, target = _check_pair(pred, target)
    p = pred.reshape(-1, 3)
    t = target.reshape(-1, 3)
    dot = np.einsum("ij,ij->i", p, t)
    np_ = np.sqrt(np.einsum("ij,ij->i", p, p))
    nt = np.sqrt(np.einsum("ij,ij->i", t, t))
    a = dot + _COS_EPS
    b = np_ * nt + _COS_EPS
    cos = a / b
    value = float(np.mean(1.0 - cos))
    # d(1-cos)/dp = -(t/b - a/b^2 * nt * p/|p|); safe divide at |p| = 0
    np_safe = np.maximum(np_, 1e-12)
    grad_p = -(t / b[:, None] - (a / (b * b) * nt / np_safe)[:, None] * p)
    grad = (grad_p / p.shape[0]).reshape(pred.shape)
    return value, grad


def _charbonnier(z):
    r = np.sqrt(z * z + _CHARB_EPS * _CHARB_EPS)
    return r - _CHARB_EPS, z / r


def edge_loss(pred, target):
    """Charbonnier penalty on the difference of horizontal and vertical first
    differences; zero when pred == target."""
    pred, target = _check_pair(pred, target)
    d = pred - target
    dx = d[:, 1:] - d[:, :-1]
    dy = d[1:, :] - d[:-1, :]
    vx, gx = _charbonnier(dx)
    vy, gy = _charbonnier(dy)
    n = dx.size + dy.size
    value = float((vx.sum() + vy.sum()) / n)
    grad = np.zeros_like(pred)
    grad[:, 1:] += gx
    grad[:, :-1] -= gx
    grad[1:, :] += gy
    grad[:-1, :] -= gy
    return value, grad / n


_PROXY_SEED = 1719


def _proxy_stack():
    spec = nn.ModelSpec([
        nn.conv("p1", 3, 8, k=3, stride=2),
        nn.relu("p1r"),
        nn.conv("p2", 8, 16, k=3, stride=2),
    ], input_channels=3)
    params = nn.init_params(spec, seeded_rng(_PROXY_SEED))
    return spec, params


_PROXY_CACHE = None


def proxy_perceptual_loss(pred, target):
    """Smoothed L1 between feature maps of a fixed random-seeded conv stack
    (stand-in for pretrained perceptual features, which are out of reach
    here). The stack weights are frozen constants of the library."""
    global _PROXY_CACHE
    if _PROXY_CACHE is None:
        _PROXY_CACHE = _proxy_stack()
    spec, params = _PROXY_CACHE
    pred, target = _check_pair(pred, target)
    xp = pred.transpose(2, 0, 1)[None]
    xt = target.transpose(2, 0, 1)[None]
    fp, cache = nn.forward(spec, params, xp)
    ft, _ = nn.forward(spec, params, xt)
    z = fp - ft
    v, gz = _charbonnier(z)
    value = float(v.mean())
    _, grad_x = nn.backward(spec, params, cache, gz / z.size)
    return value, grad_x[0].transpose(1, 2, 0)


def stage1_loss(pred, target, weights: LossWeights = None):
    """L1 + cosine color shift."""
    w = weights or LossWeights()
    v1, g1 = l1_loss(pred, target)
    v2, g2 = cosine_color_loss(pred, target)
    return w.l1 * v1 + w.cosine_color * v2, w.l1 * g1 + w.cosine_color * g2


def stage2_loss(pred, target, weights: LossWeights = None):
    """L2 + edge term (+ proxy perceptual when its weight is nonzero)."""
    w = weights or LossWeights()
    v, g = l2_loss(pred, target)
    value = w.l2 * v
    grad = w.l2 * g
    if w.edge > 0:
        ve, ge = edge_loss(pred, target)
        value += w.edge * ve
        grad = grad + w.edge * ge
    if w.proxy_perceptual > 0:
        vp, gp = proxy_perceptual_loss(pred, target)
        value += w.proxy_perceptual * vp
        grad = grad + w.proxy_perceptual * gp
    return value, grad


def quality_loss(frames, scorer_clip, scorer_vqa) -> float:
    """(1 - mean Q_c) + (1 - mean Q_v) over a batch of frames."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 3:
        frames = frames[None]
    if frames.shape[0] < 1:
        raise ValidationError("quality_loss needs at least one frame")
    total = 0.0
    for scorer in (scorer_clip, scorer_vqa):
        q = np.asarray(scorer(frames), dtype=np.float64).reshape(-1)
        if q.shape[0] != frames.shape[0]:
            raise ValidationError(f"scorer returned {q.shape[0]} values for {frames.shape[0]} frames")
        if np.any(q < 0.0) or np.any(q > 1.0):
            raise ValidationError("scorer returned value outside [0,1]")
        total += 1.0 - float(q.mean())
    return total


def total_loss(colorspace: float, quality: float, lam: float = 0.75) -> float:
    if lam < 0:
        raise ValidationError(f"lambda must be >= 0, got {lam}")
    return colorspace + lam * quality
