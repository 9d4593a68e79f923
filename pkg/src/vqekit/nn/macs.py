"""Multiply-accumulate audit for ModelSpec graphs.

Only convolutions count (k*k*c_in*c_out*h_out*w_out); activations, pooling,
resampling, concat and softmax contribute zero. The count is per frame at the
given input resolution.
"""

from __future__ import annotations

from ..validation import ValidationError
from .net import ModelSpec

FRAME_BUDGET = 20_000_000_000  # qualifying cap per frame at full resolution


def layer_macs(model: ModelSpec, height: int, width: int):
    """Per-layer (name, macs, out_shape) walking shapes through the graph."""
    if height < 1 or width < 1:
        raise ValidationError(f"input dims must be positive, got {height}x{width}")
    shapes = {"input": (model.input_channels, height, width)}
    c, h, w = model.input_channels, height, width
    rows = []
    for l in model.layers:
        macs = 0
        if l.kind == "conv":
            h = (h + 2 * l.pad - l.k) // l.stride + 1
            w = (w + 2 * l.pad - l.k) // l.stride + 1
            if h < 1 or w < 1:
                raise ValidationError(f"{l.name}: output shrinks to {h}x{w}")
            c = l.c_out
            macs = l.k * l.k * l.c_in * l.c_out * h * w
        elif l.kind == "avgpool_global":
            h = w = 1
        elif l.kind == "upsample_nearest":
            h, w = h * 2, w * 2
        elif l.kind == "downsample_avg":
            h, w = h // 2, w // 2
        elif l.kind == "concat_skip":
            c = c + shapes[l.source][0]
        shapes[l.name] = (c, h, w)
        rows.append((l.name, macs, (c, h, w)))
    return rows


def count_macs(model: ModelSpec, height: int, width: int) -> int:
    return sum(m for _, m, _ in layer_macs(model, height, width))


def audit_budget(model: ModelSpec, height: int, width: int, budget: int = FRAME_BUDGET):
    """(macs, passes) against the per-frame budget."""
    macs = count_macs(model, height, width)
    return macs, macs <= budget
