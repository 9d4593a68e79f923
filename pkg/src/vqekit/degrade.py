"""Seeded synthesis of training degradations.

A recipe is a seed plus an ordered step list drawn from five families: blur,
additive Gaussian noise (color or gray), Poisson sensor noise, resizing, and
a JPEG quantization simulation. Applying a recipe is a pure function of
(clip, recipe): the rng is split per frame from (seed, frame_index) so serial
and parallel runs agree bitwise. Intermediate values are unclamped; the final
result is clamped to [0,1] once.
"""

from __future__ import annotations

import json

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from .rand import frame_rng, seeded_rng
from .resize import resize_bilinear, resize_by_factor
from .validation import ValidationError, check_frame


def gg_blur_kernel(sigma: float, beta: float, ksize: int) -> np.ndarray:
    """Generalized Gaussian kernel: k(i,j) proportional to exp(-(r/sigma)^beta).

    beta=2 is an ordinary Gaussian; small beta gives ramp edges, large beta a
    flat top inside r < sigma. Normalized to sum 1.
    """
    if not (sigma > 0):
        raise ValidationError(f"sigma must be positive, got {sigma}")
    if not (0.5 <= beta <= 8.0):
        raise ValidationError(f"beta must lie in [0.5, 8], got {beta}")
    if ksize < 3 or ksize % 2 == 0:
        raise ValidationError(f"ksize must be odd and >= 3, got {ksize}")
    half = ksize // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    r = np.hypot(ax[:, None], ax[None, :])
    k = np.exp(-((r / sigma) ** beta))
    return k / k.sum()


def apply_blur(frame, kernel) -> np.ndarray:
    """Convolve each channel with replicate padding, so constant frames pass
    through exactly."""
    frame = check_frame(frame)
    kernel = np.asarray(kernel, dtype=np.float64)
    out = np.empty_like(frame)
    for c in range(3):
        # kernel is symmetric, correlate == convolve
        out[:, :, c] = ndimage.correlate(frame[:, :, c], kernel, mode="nearest")
    return out


def add_gauss_noise(frame, sigma_n: float, gray: bool, rng) -> np.ndarray:
    if sigma_n < 0:
        raise ValidationError(f"sigma_n must be >= 0, got {sigma_n}")
    frame = check_frame(frame)
    if sigma_n == 0:
        return frame.copy()
    h, w = frame.shape[:2]
    if gray:
        noise = rng.normal(0.0, sigma_n, size=(h, w, 1))
    else:
        noise = rng.normal(0.0, sigma_n, size=(h, w, 3))
    return frame + noise


def add_poisson_noise(frame, scale: float, rng) -> np.ndarray:
    """out = Poisson(in * scale) / scale; clamps negatives to 0 first since the
    Poisson rate must be nonnegative (inputs mid-chain may dip below 0)."""
    if not (scale > 0):
        raise ValidationError(f"scale must be positive, got {scale}")
    frame = check_frame(frame)
    lam = np.maximum(frame, 0.0) * scale
    return rng.poisson(lam).astype(np.float64) / scale


# Annex K baseline quantization tables.
_LUMA_Q = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.float64)
_CHROMA_Q = np.array([
    [17, 18, 24, 47, 99, 99, 99, 99],
    [18, 21, 26, 66, 99, 99, 99, 99],
    [24, 26, 56, 99, 99, 99, 99, 99],
    [47, 66, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
], dtype=np.float64)

_KR, _KB = 0.299, 0.114
_KG = 1.0 - _KR - _KB
# [Y, Cb, Cr] = _RGB2YCC @ [R, G, B] + [0, 128, 128] (255-scale values)
_RGB2YCC = np.array([
    [_KR, _KG, _KB],
    [-0.5 * _KR / (1 - _KB), -0.5 * _KG / (1 - _KB), 0.5],
    [0.5, -0.5 * _KG / (1 - _KR), -0.5 * _KB / (1 - _KR)],
])
_YCC2RGB = np.linalg.inv(_RGB2YCC)


def quality_tables(quality: int):
    """IJG quality scaling of the Annex K tables."""
    if not (1 <= quality <= 100):
        raise ValidationError(f"quality must lie in [1, 100], got {quality}")
    s = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    def scale(q):
        return np.clip(np.floor((q * s + 50.0) / 100.0), 1, 255)
    return scale(_LUMA_Q), scale(_CHROMA_Q)


def _blockwise_quantize(plane, q):
    """DCT-quantize-dequantize every 8x8 block of a padded plane."""
    h, w = plane.shape
    blocks = plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)
    coef = sfft.dctn(blocks, axes=(-2, -1), norm="ortho")
    coef = np.round(coef / q) * q
    rec = sfft.idctn(coef, axes=(-2, -1), norm="ortho")
    return rec.transpose(0, 2, 1, 3).reshape(h, w)


def jpeg_simulate(frame, quality: int) -> np.ndarray:
    """Quantization-only JPEG artifact model (no entropy coding, no chroma
    subsampling): RGB -> YCbCr, per-channel 8x8 DCT quantization with the
    quality-scaled baseline tables, back to RGB. Edge blocks are replicate
    padded to a multiple of 8."""
    frame = check_frame(frame)
    luma_q, chroma_q = quality_tables(quality)
    h, w = frame.shape[:2]
    ph = (-h) % 8
    pw = (-w) % 8
    v255 = frame * 255.0
    ycc = np.einsum("ij,hwj->hwi", _RGB2YCC, v255)
    ycc[:, :, 1:] += 128.0
    if ph or pw:
        ycc = np.pad(ycc, ((0, ph), (0, pw), (0, 0)), mode="edge")
    out = np.empty_like(ycc)
    for c, q in ((0, luma_q), (1, chroma_q), (2, chroma_q)):
        out[:, :, c] = _blockwise_quantize(ycc[:, :, c] - 128.0, q) + 128.0
    out = out[:h, :w]
    out[:, :, 1:] -= 128.0
    rgb = np.einsum("ij,hwj->hwi", _YCC2RGB, out)
    return rgb / 255.0


def blur_step(sigma, beta, ksize):
    gg_blur_kernel(sigma, beta, ksize)  # validates
    return {"kind": "blur", "sigma": float(sigma), "beta": float(beta), "ksize": int(ksize)}


def gauss_noise_step(sigma_n, gray=False):
    if sigma_n < 0:
        raise ValidationError(f"sigma_n must be >= 0, got {sigma_n}")
    return {"kind": "gauss_noise", "sigma_n": float(sigma_n), "gray": bool(gray)}


def poisson_step(scale):
    if not (scale > 0):
        raise ValidationError(f"scale must be positive, got {scale}")
    return {"kind": "poisson", "scale": float(scale)}


def resize_step(factor, back=True):
    if not (0 < factor <= 2):
        raise ValidationError(f"factor must lie in (0, 2], got {factor}")
    return {"kind": "resize", "factor": float(factor), "back": bool(back)}


def jpeg_step(quality):
    quality_tables(quality)  # validates
    return {"kind": "jpeg", "quality": int(quality)}


_STEP_BUILDERS = {
    "blur": blur_step,
    "gauss_noise": gauss_noise_step,
    "poisson": poisson_step,
    "resize": resize_step,
    "jpeg": jpeg_step,
}


class DegradationRecipe:
    """Seed + ordered validated step list; JSON serializable."""

    def __init__(self, seed: int, steps):
        self.seed = int(seed)
        self.steps = []
        for st in steps:
            st = dict(st)
            kind = st.pop("kind", None)
            if kind not in _STEP_BUILDERS:
                raise ValidationError(f"unknown degradation step kind {kind!r}")
            self.steps.append(_STEP_BUILDERS[kind](**st))

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "steps": self.steps}, indent=2)

    @staticmethod
    def from_json(text: str) -> "DegradationRecipe":
        data = json.loads(text)
        return DegradationRecipe(data["seed"], data["steps"])

    def __eq__(self, other):
        return (isinstance(other, DegradationRecipe)
                and self.seed == other.seed and self.steps == other.steps)


def apply_step(frame, step, rng):
    kind = step["kind"]
    if kind == "blur":
        return apply_blur(frame, gg_blur_kernel(step["sigma"], step["beta"], step["ksize"]))
    if kind == "gauss_noise":
        return add_gauss_noise(frame, step["sigma_n"], step["gray"], rng)
    if kind == "poisson":
        return add_poisson_noise(frame, step["scale"], rng)
    if kind == "resize":
        h, w = frame.shape[:2]
        small = resize_by_factor(frame, step["factor"])
        if step["back"]:
            return resize_bilinear(small, h, w)
        return small
    if kind == "jpeg":
        return jpeg_simulate(frame, step["quality"])
    raise ValidationError(f"unknown degradation step kind {kind!r}")


def run_recipe_frame(frame, recipe: DegradationRecipe, frame_index: int) -> np.ndarray:
    rng = frame_rng(recipe.seed, frame_index)
    out = check_frame(frame)
    for step in recipe.steps:
        out = apply_step(out, step, rng)
    return np.clip(out, 0.0, 1.0)


def run_recipe(clip, recipe: DegradationRecipe):
    from .io import Clip
    frames = [run_recipe_frame(clip.frames[i], recipe, i) for i in range(len(clip))]
    return Clip(np.stack(frames), fps=clip.fps, clip_id=clip.clip_id)


DEFAULT_PROFILE = {
    "sigma": (0.2, 3.0),
    "beta": (0.5, 4.0),
    "ksize": (7, 21),
    "sigma_n": (0.0, 0.06),
    "gray_prob": 0.5,
    "poisson_scale": (50.0, 500.0),
    "factor": (0.5, 1.0),
    "quality": (30, 95),
}


def _range(profile, key):
    if key not in profile:
        raise ValidationError(f"profile missing range {key!r}")
    rng_pair = profile[key]
    if len(rng_pair) != 2 or rng_pair[0] > rng_pair[1]:
        raise ValidationError(f"profile range {key!r} malformed: {rng_pair}")
    return float(rng_pair[0]), float(rng_pair[1])


def sample_recipe(rng, profile=None, seed=None) -> DegradationRecipe:
    """Draw one step of each family in the chain order blur -> gauss noise ->
    poisson -> resize -> jpeg, parameters uniform over the profile ranges."""
    profile = dict(DEFAULT_PROFILE if profile is None else profile)
    lo, hi = _range(profile, "sigma")
    sigma = rng.uniform(lo, hi)
    lo, hi = _range(profile, "beta")
    beta = rng.uniform(lo, hi)
    klo, khi = _range(profile, "ksize")
    klo, khi = int(klo), int(khi)
    if klo % 2 == 0 or khi % 2 == 0 or klo > khi:
        raise ValidationError(f"ksize range must be odd endpoints, got {(klo, khi)}")
    ksize = int(rng.choice(np.arange(klo, khi + 1, 2)))
    lo, hi = _range(profile, "sigma_n")
    sigma_n = rng.uniform(lo, hi)
    gray = bool(rng.random() < float(profile.get("gray_prob", 0.5)))
    lo, hi = _range(profile, "poisson_scale")
    pscale = rng.uniform(lo, hi)
    lo, hi = _range(profile, "factor")
    factor = rng.uniform(lo, hi)
    qlo, qhi = _range(profile, "quality")
    quality = int(rng.integers(int(qlo), int(qhi) + 1))
    if seed is None:
        seed = int(rng.integers(0, 2 ** 63 - 1))
    return DegradationRecipe(seed, [
        blur_step(sigma, beta, ksize),
        gauss_noise_step(sigma_n, gray),
        poisson_step(pscale),
        resize_step(factor, back=True),
        jpeg_step(quality),
    ])


def intensity_histogram(clip, bins: int = 256):
    """Histogram of Rec.601 luma scaled to [0,255] over all frames.

    Returns (counts, edges); counts sum to the total pixel count.
    """
    if bins < 2:
        raise ValidationError(f"bins must be >= 2, got {bins}")
    frames = clip.frames
    luma = (0.299 * frames[..., 0] + 0.587 * frames[..., 1] + 0.114 * frames[..., 2]) * 255.0
    counts, edges = np.histogram(luma, bins=bins, range=(0.0, 256.0))
    return counts, edges
