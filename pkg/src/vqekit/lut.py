"""3D look-up-table color transforms.

A Lut3D is a cubic lattice mapping input RGB to output RGB; colors between
lattice points are trilinearly interpolated. A LutBank is a set of basis LUTs
blended by content-dependent weights into a single per-frame LUT. The trilinear
map is linear in the lattice entries, which is what makes LUT fitting by
gradient descent exact (`lut_gradients` scatters each pixel's upstream gradient
onto its 8 enclosing corners).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import ValidationError, check_frame


@dataclass
class Lut3D:
    """Lattice color transform.

    ``table`` has shape (n, n, n, 3) indexed [ri, gi, bi, channel]. Entries are
    unclamped scalars: clamping happens once at the end of a pipeline, not per
    lookup, so training gradients never die at the gamut boundary.
    """

    table: np.ndarray

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.float64)
        if self.table.ndim != 4 or self.table.shape[3] != 3:
            raise ValidationError(f"LUT table must be (n, n, n, 3), got {self.table.shape}")
        n = self.table.shape[0]
        if self.table.shape[:3] != (n, n, n):
            raise ValidationError(f"LUT table must be cubic, got {self.table.shape}")
        if n < 2:
            raise ValidationError(f"LUT size must be >= 2, got {n}")
        if not np.all(np.isfinite(self.table)):
            raise ValidationError("LUT table contains non-finite values")

    @property
    def n(self) -> int:
        return self.table.shape[0]

    def copy(self) -> "Lut3D":
        return Lut3D(self.table.copy())


def identity_lut(n: int = 33) -> Lut3D:
    """LUT that maps every lattice point to its own coordinates."""
    if n < 2:
        raise ValidationError(f"LUT size must be >= 2, got {n}")
    ax = np.arange(n, dtype=np.float64) / (n - 1)
    r, g, b = np.meshgrid(ax, ax, ax, indexing="ij")
    return Lut3D(np.stack([r, g, b], axis=-1))


@dataclass
class LutBank:
    """k basis LUTs of equal lattice size."""

    luts: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.luts) < 1:
            raise ValidationError("LutBank needs at least one basis LUT")
        n = self.luts[0].n
        for i, lut in enumerate(self.luts):
            if lut.n != n:
                raise ValidationError(f"basis {i} has size {lut.n}, expected {n}")

    @property
    def k(self) -> int:
        return len(self.luts)

    @property
    def n(self) -> int:
        return self.luts[0].n

    def stack(self) -> np.ndarray:
        """(k, n, n, n, 3) view used by fuse/gradient code."""
        return np.stack([lut.table for lut in self.luts])


def initial_bank(k: int = 5, n: int = 33, perturbation: float = 0.02, rng=None) -> LutBank:
    """Basis 0 is the identity; the rest are identity plus a small seeded
    perturbation so training starts from a no-op enhancement."""
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(0))
    luts = [identity_lut(n)]
    for _ in range(k - 1):
        table = identity_lut(n).table
        table += rng.uniform(-perturbation, perturbation, size=table.shape)
        luts.append(Lut3D(table))
    return LutBank(luts)


def _lerp(a, b, t):
    # a + t*(b - a) is exact at t == 0 and, for identity lattices whose spacing
    # is a power of two (n-1 in {1, 2, 4, 8, 16, 32, ...}), reproduces the
    # input bitwise. The where() keeps t == 1 exact as well (upper gamut face).
    out = a + t * (b - a)
    if np.any(t == 1.0):
        out = np.where(t == 1.0, b, out)
    return out


def _cell_coords(rgb: np.ndarray, n: int):
    """Per-axis cell index and fractional offset for query points in [0,1]^3."""
    pos = np.clip(rgb, 0.0, 1.0) * (n - 1)
    idx = np.minimum(pos.astype(np.int64), n - 2)
    frac = pos - idx
    return idx, frac


def lut_lookup(lut: Lut3D, rgb) -> np.ndarray:
    """Trilinear interpolation of ``lut`` at points ``rgb`` (..., 3) in [0,1]^3.

    Exact at lattice points; output is not clamped here.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    t = lut.table
    n = lut.n
    idx, frac = _cell_coords(rgb, n)
    ri, gi, bi = idx[..., 0], idx[..., 1], idx[..., 2]
    fr = frac[..., 0:1]
    fg = frac[..., 1:2]
    fb = frac[..., 2:3]

    c000 = t[ri, gi, bi]
    c100 = t[ri + 1, gi, bi]
    c010 = t[ri, gi + 1, bi]
    c110 = t[ri + 1, gi + 1, bi]
    c001 = t[ri, gi, bi + 1]
    c101 = t[ri + 1, gi, bi + 1]
    c011 = t[ri, gi + 1, bi + 1]
    c111 = t[ri + 1, gi + 1, bi + 1]

    c00 = _lerp(c000, c100, fr)
    c10 = _lerp(c010, c110, fr)
    c01 = _lerp(c001, c101, fr)
    c11 = _lerp(c011, c111, fr)
    c0 = _lerp(c00, c10, fg)
    c1 = _lerp(c01, c11, fg)
    return _lerp(c0, c1, fb)


def apply_lut_raw(lut: Lut3D, frame) -> np.ndarray:
    """Per-pixel lookup without the final clamp (training / mid-pipeline)."""
    frame = check_frame(frame)
    return lut_lookup(lut, frame)


def apply_lut(lut: Lut3D, frame) -> np.ndarray:
    """Per-pixel lookup, clamped to [0, 1]."""
    return np.clip(apply_lut_raw(lut, frame), 0.0, 1.0)


def fuse_bank(bank: LutBank, weights) -> Lut3D:
    """Weighted sum of the basis lattices. No normalization is imposed."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (bank.k,):
        raise ValidationError(f"expected {bank.k} weights, got shape {weights.shape}")
    table = np.tensordot(weights, bank.stack(), axes=1)
    return Lut3D(table)


def fuse_weight_gradients(bank: LutBank, grad_table: np.ndarray) -> np.ndarray:
    """Gradient of a loss w.r.t. fusion weights, given grad w.r.t. the fused
    lattice: dL/dw_i = <grad_table, lattice_i>."""
    return np.tensordot(bank.stack(), grad_table, axes=4)


def trilinear_weights(rgb: np.ndarray, n: int):
    """Corner indices (8 triples) and weights for each query point.

    Returns (idx, frac) plus the 8 (weight, (di,dg,db)) corner legs; shared by
    the gradient scatter so forward and backward use identical cells.
    """
    idx, frac = _cell_coords(np.asarray(rgb, dtype=np.float64), n)
    fr, fg, fb = frac[..., 0], frac[..., 1], frac[..., 2]
    legs = []
    for dr in (0, 1):
        wr = fr if dr else 1.0 - fr
        for dg in (0, 1):
            wg = fg if dg else 1.0 - fg
            for db in (0, 1):
                wb = fb if db else 1.0 - fb
                legs.append((wr * wg * wb, (dr, dg, db)))
    return idx, legs


def lut_gradients(lut: Lut3D, frame, grad_out) -> np.ndarray:
    """Exact gradient of apply_lut_raw w.r.t. the lattice entries.

    Each pixel scatters its upstream gradient onto its 8 enclosing corners with
    its trilinear weights. Returns an (n, n, n, 3) array; per channel the total
    scattered mass equals the total upstream gradient.
    """
    frame = check_frame(frame)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    check = frame.shape == grad_out.shape
    if not check:
        raise ValidationError(f"grad_out shape {grad_out.shape} != frame shape {frame.shape}")
    n = lut.n
    idx, legs = trilinear_weights(frame.reshape(-1, 3), n)
    ri, gi, bi = idx[:, 0], idx[:, 1], idx[:, 2]
    g = grad_out.reshape(-1, 3)
    grad_table = np.zeros((n, n, n, 3), dtype=np.float64)
    for w, (dr, dg, db) in legs:
        np.add.at(grad_table, (ri + dr, gi + dg, bi + db), w[:, None] * g)
    return grad_table


def lut_regularizers(lut: Lut3D):
    """Smoothness and monotonicity penalties with their lattice gradients.

    smoothness: mean squared second difference along each lattice axis (all
    three output channels). monotonicity: mean squared negative first
    difference of each channel along its own axis (R along the r axis, etc.).
    Returns (smoothness, monotonicity, grad_smooth, grad_mono).
    """
    t = lut.table
    n = lut.n
    grad_s = np.zeros_like(t)
    grad_m = np.zeros_like(t)

    # Second differences along each axis, all channels.
    terms = 0
    total = 0.0
    for axis in range(3):
        if n < 3:
            continue
        sl_m = [slice(None)] * 4
        sl_0 = [slice(None)] * 4
        sl_p = [slice(None)] * 4
        sl_m[axis] = slice(0, n - 2)
        sl_0[axis] = slice(1, n - 1)
        sl_p[axis] = slice(2, n)
        d2 = t[tuple(sl_p)] - 2.0 * t[tuple(sl_0)] + t[tuple(sl_m)]
        total += float(np.sum(d2 * d2))
        terms += d2.size
        grad_s[tuple(sl_p)] += 2.0 * d2
        grad_s[tuple(sl_0)] += -4.0 * d2
        grad_s[tuple(sl_m)] += 2.0 * d2
    smoothness = total / terms if terms else 0.0
    if terms:
        grad_s /= terms

    # Negative first differences: channel ch along axis ch.
    terms = 0
    total = 0.0
    for ch in range(3):
        sl_lo = [slice(None)] * 3 + [ch]
        sl_hi = [slice(None)] * 3 + [ch]
        sl_lo[ch] = slice(0, n - 1)
        sl_hi[ch] = slice(1, n)
        d1 = t[tuple(sl_hi)] - t[tuple(sl_lo)]
        neg = np.minimum(d1, 0.0)
        total += float(np.sum(neg * neg))
        terms += d1.size
        grad_m[tuple(sl_hi)] += 2.0 * neg
        grad_m[tuple(sl_lo)] += -2.0 * neg
    monotonicity = total / terms if terms else 0.0
    if terms:
        grad_m /= terms

    return smoothness, monotonicity, grad_s, grad_m
