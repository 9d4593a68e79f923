"""Small deterministic conv-net substrate.

Tensors are NCHW float64 arrays. The layer vocabulary is fixed and every
backward pass is written by hand, so the numeric core stays auditable; there
is no general autodiff. Convolution runs per sample through an im2col matmul
whose shape is independent of batch size, which makes forward bitwise
batch-equivariant (concatenating batches equals concatenating outputs).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..validation import ValidationError

CONV_KINDS = ("conv",)
KINDS = (
    "conv",
    "relu",
    "leaky_relu",
    "avgpool_global",
    "upsample_nearest",
    "downsample_avg",
    "concat_skip",
    "add_skip",
    "softmax",
)


@dataclass
class LayerSpec:
    kind: str
    name: str
    k: int = 0
    stride: int = 1
    pad: int = 0
    c_in: int = 0
    c_out: int = 0
    bias: bool = True
    alpha: float = 0.0
    source: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv":
            if self.k not in (1, 3):
                raise ValidationError(f"{self.name}: conv kernel must be 1 or 3, got {self.k}")
            if self.stride not in (1, 2):
                raise ValidationError(f"{self.name}: conv stride must be 1 or 2, got {self.stride}")
            if self.c_in < 1 or self.c_out < 1:
                raise ValidationError(f"{self.name}: conv channels must be >= 1")
            if self.pad < 0:
                raise ValidationError(f"{self.name}: conv pad must be >= 0")
        if self.kind in ("concat_skip", "add_skip") and not self.source:
            raise ValidationError(f"{self.name}: skip layer needs a source")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "name": self.name}
        if self.kind == "conv":
            d.update(k=self.k, stride=self.stride, pad=self.pad, c_in=self.c_in,
                     c_out=self.c_out, bias=self.bias)
        if self.kind == "leaky_relu":
            d["alpha"] = self.alpha
        if self.kind in ("concat_skip", "add_skip"):
            d["source"] = self.source
        return d


def conv(name, c_in, c_out, k=3, stride=1, pad=None, bias=True):
    if pad is None:
        pad = k // 2
    return LayerSpec("conv", name, k=k, stride=stride, pad=pad, c_in=c_in, c_out=c_out, bias=bias)


def relu(name):
    return LayerSpec("relu", name)


def leaky_relu(name, alpha=0.2):
    return LayerSpec("leaky_relu", name, alpha=alpha)


def avgpool_global(name):
    return LayerSpec("avgpool_global", name)


def upsample_nearest(name):
    return LayerSpec("upsample_nearest", name)


def downsample_avg(name):
    return LayerSpec("downsample_avg", name)


def concat_skip(name, source):
    return LayerSpec("concat_skip", name, source=source)


def add_skip(name, source):
    return LayerSpec("add_skip", name, source=source)


def softmax(name):
    return LayerSpec("softmax", name)


@dataclass
class ModelSpec:
    """Ordered layer list. ``input_channels`` anchors the channel chain; skip
    sources may also be the literal "input"."""

    layers: list
    input_channels: int = 3

    def __post_init__(self):
        names = [l.name for l in self.layers]
        if len(set(names)) != len(names):
            raise ValidationError("layer names must be unique")
        self.validate_channels()

    def validate_channels(self):
        """Walk the chain, checking conv c_in and skip wiring."""
        chans = {"input": self.input_channels}
        cur = self.input_channels
        seen = set()
        for l in self.layers:
            if l.kind == "conv":
                if l.c_in != cur:
                    raise ValidationError(
                        f"{l.name}: expects {l.c_in} input channels, chain carries {cur}")
                cur = l.c_out
            elif l.kind == "concat_skip":
                if l.source != "input" and l.source not in seen:
                    raise ValidationError(f"{l.name}: skip source {l.source!r} not defined before it")
                cur = cur + chans[l.source]
            elif l.kind == "add_skip":
                if l.source != "input" and l.source not in seen:
                    raise ValidationError(f"{l.name}: skip source {l.source!r} not defined before it")
                if chans[l.source] != cur:
                    raise ValidationError(
                        f"{l.name}: add_skip needs matching channels "
                        f"({chans[l.source]} vs {cur})")
            chans[l.name] = cur
            seen.add(l.name)
        self.output_channels = cur

    def to_dict(self) -> dict:
        return {"input_channels": self.input_channels,
                "layers": [l.to_dict() for l in self.layers]}

    @staticmethod
    def from_dict(d) -> "ModelSpec":
        layers = [LayerSpec(**ld) for ld in d["layers"]]
        return ModelSpec(layers, input_channels=int(d["input_channels"]))

    def spec_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def check_tensor4(x, name="tensor") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ValidationError(f"{name}: expected (batch, channels, h, w), got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name}: non-finite values")
    return x


def init_params(model: ModelSpec, rng) -> dict:
    """Kaiming-uniform conv weights (fan-in), zero bias."""
    params = {}
    for l in model.layers:
        if l.kind != "conv":
            continue
        fan_in = l.c_in * l.k * l.k
        bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(l.c_out, l.c_in, l.k, l.k))
        p = {"w": w}
        if l.bias:
            p["b"] = np.zeros(l.c_out)
        params[l.name] = p
    return params


def _im2col(x, k, stride, pad):
    """(c, h, w) sample to (h_out*w_out, c*k*k) patch matrix."""
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    c, hp, wp = x.shape
    if hp < k or wp < k:
        raise ValidationError(f"spatial dims {hp}x{wp} smaller than kernel {k}")
    win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    c, h_out, w_out = win.shape[:3]
    cols = win.transpose(1, 2, 0, 3, 4).reshape(h_out * w_out, c * k * k)
    return cols, h_out, w_out, hp, wp


def _conv_forward(l: LayerSpec, p: dict, x: np.ndarray):
    n = x.shape[0]
    w_flat = p["w"].reshape(l.c_out, -1)
    outs = []
    cols_cache = []
    for s in range(n):
        cols, h_out, w_out, hp, wp = _im2col(x[s], l.k, l.stride, l.pad)
        y = cols @ w_flat.T
        if l.bias:
            y = y + p["b"]
        outs.append(y.T.reshape(l.c_out, h_out, w_out))
        cols_cache.append(cols)
    return np.stack(outs), {"cols": cols_cache, "x_shape": x.shape, "hp": hp, "wp": wp,
                            "h_out": h_out, "w_out": w_out}


def _conv_backward(l: LayerSpec, p: dict, cache: dict, grad_y: np.ndarray):
    n, _, h_out, w_out = grad_y.shape
    w_flat = p["w"].reshape(l.c_out, -1)
    grad_w = np.zeros_like(w_flat)
    grad_b = np.zeros(l.c_out) if l.bias else None
    _, c_in, h, w = cache["x_shape"]
    hp, wp = cache["hp"], cache["wp"]
    grad_x = np.zeros((n, c_in, hp, wp))
    ii = np.arange(h_out) * l.stride
    jj = np.arange(w_out) * l.stride
    for s in range(n):
        g_flat = grad_y[s].reshape(l.c_out, -1).T  # (h_out*w_out, c_out)
        cols = cache["cols"][s]
        grad_w += g_flat.T @ cols
        if l.bias:
            grad_b += g_flat.sum(axis=0)
        g_cols = g_flat @ w_flat  # (h_out*w_out, c_in*k*k)
        g_win = g_cols.reshape(h_out, w_out, c_in, l.k, l.k).transpose(2, 0, 1, 3, 4)
        for ki in range(l.k):
            for kj in range(l.k):
                # distinct output positions within a fixed (ki, kj), so += is safe
                grad_x[s][:, (ii + ki)[:, None], (jj + kj)[None, :]] += g_win[:, :, :, ki, kj]
    if l.pad:
        grad_x = grad_x[:, :, l.pad:hp - l.pad, l.pad:wp - l.pad]
    gp = {"w": grad_w.reshape(p["w"].shape)}
    if l.bias:
        gp["b"] = grad_b
    return gp, grad_x


def forward(model: ModelSpec, params: dict, x, check_finite=True):
    """Run the net; returns (y, cache) with cache sufficient for backward."""
    x = check_tensor4(x, "input")
    if x.shape[1] != model.input_channels:
        raise ValidationError(
            f"input has {x.shape[1]} channels, model expects {model.input_channels}")
    outputs = {"input": x}
    caches = {}
    cur = x
    for l in model.layers:
        if l.kind == "conv":
            cur, caches[l.name] = _conv_forward(l, params[l.name], cur)
        elif l.kind == "relu":
            caches[l.name] = cur > 0
            cur = np.maximum(cur, 0.0)
        elif l.kind == "leaky_relu":
            mask = cur > 0
            caches[l.name] = mask
            cur = np.where(mask, cur, l.alpha * cur)
        elif l.kind == "avgpool_global":
            caches[l.name] = cur.shape
            cur = cur.mean(axis=(2, 3), keepdims=True)
        elif l.kind == "upsample_nearest":
            cur = np.repeat(np.repeat(cur, 2, axis=2), 2, axis=3)
        elif l.kind == "downsample_avg":
            n, c, h, w = cur.shape
            if h % 2 or w % 2:
                raise ValidationError(f"{l.name}: downsample_avg needs even dims, got {h}x{w}")
            cur = cur.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
        elif l.kind == "concat_skip":
            src = outputs[l.source]
            if src.shape[2:] != cur.shape[2:]:
                raise ValidationError(
                    f"{l.name}: spatial mismatch {src.shape[2:]} vs {cur.shape[2:]}")
            caches[l.name] = cur.shape[1]
            cur = np.concatenate([cur, src], axis=1)
        elif l.kind == "add_skip":
            src = outputs[l.source]
            if src.shape != cur.shape:
                raise ValidationError(f"{l.name}: shape mismatch {src.shape} vs {cur.shape}")
            cur = cur + src
        elif l.kind == "softmax":
            z = cur - cur.max(axis=1, keepdims=True)
            e = np.exp(z)
            cur = e / e.sum(axis=1, keepdims=True)
            caches[l.name] = cur
        if check_finite and not np.all(np.isfinite(cur)):
            raise ValidationError(f"non-finite activation after layer {l.name!r}")
        outputs[l.name] = cur
    return cur, {"outputs": outputs, "layers": caches}


def backward(model: ModelSpec, params: dict, cache: dict, grad_y):
    """Exact gradients of forward. Returns (grad_params, grad_x)."""
    grad_y = np.asarray(grad_y, dtype=np.float64)
    outputs = cache["outputs"]
    caches = cache["layers"]
    grad_params = {}
    # pending[name]: gradient waiting for the output of an earlier layer
    pending = {}
    grad = grad_y
    for l in reversed(model.layers):
        if l.name in pending:
            grad = grad + pending.pop(l.name)
        if l.kind == "conv":
            gp, grad = _conv_backward(l, params[l.name], caches[l.name], grad)
            grad_params[l.name] = gp
        elif l.kind == "relu":
            grad = grad * caches[l.name]
        elif l.kind == "leaky_relu":
            grad = np.where(caches[l.name], grad, l.alpha * grad)
        elif l.kind == "avgpool_global":
            n, c, h, w = caches[l.name]
            grad = np.broadcast_to(grad / (h * w), (n, c, h, w)).copy()
        elif l.kind == "upsample_nearest":
            n, c, h2, w2 = grad.shape
            grad = grad.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5))
        elif l.kind == "downsample_avg":
            grad = np.repeat(np.repeat(grad, 2, axis=2), 2, axis=3) / 4.0
        elif l.kind == "concat_skip":
            nc = caches[l.name]
            pending[l.source] = pending.get(l.source, 0.0) + grad[:, nc:]
            grad = grad[:, :nc]
        elif l.kind == "add_skip":
            pending[l.source] = pending.get(l.source, 0.0) + grad
        elif l.kind == "softmax":
            y = caches[l.name]
            grad = y * (grad - (grad * y).sum(axis=1, keepdims=True))
    grad_x = grad
    if "input" in pending:
        grad_x = grad_x + pending.pop("input")
    if pending:
        raise ValidationError(f"unresolved skip gradients: {sorted(pending)}")
    return grad_params, grad_x
