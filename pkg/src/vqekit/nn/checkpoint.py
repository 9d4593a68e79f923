"""Parameter checkpoints.

Layout: one JSON header line (UTF-8, newline terminated), then all tensors as
a contiguous little-endian float64 blob. The header records the model spec
hash and, per tensor, its element offset and shape, so files are inspectable
with nothing but a text editor and a hex dump.
"""

from __future__ import annotations

import json

import numpy as np

from ..validation import ValidationError
from .net import ModelSpec


def save_params(params: dict, path, model: ModelSpec = None) -> None:
    index = {}
    chunks = []
    offset = 0
    for name in sorted(params):
        for key in sorted(params[name]):
            arr = np.ascontiguousarray(params[name][key], dtype="<f8")
            index[f"{name}.{key}"] = {"offset": offset, "shape": list(arr.shape)}
            chunks.append(arr.tobytes())
            offset += arr.size
    header = {"format": "vqekit-params-v1", "tensors": index}
    if model is not None:
        header["spec_hash"] = model.spec_hash()
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for ch in chunks:
            f.write(ch)


def load_params(path, model: ModelSpec = None) -> dict:
    with open(path, "rb") as f:
        header_line = f.readline()
        blob = f.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ValidationError(f"{path}: malformed checkpoint header")
    if header.get("format") != "vqekit-params-v1":
        raise ValidationError(f"{path}: not a parameter checkpoint")
    if model is not None and "spec_hash" in header:
        if header["spec_hash"] != model.spec_hash():
            raise ValidationError(
                f"{path}: checkpoint was saved for a different model spec "
                f"({header['spec_hash']} vs {model.spec_hash()})")
    flat = np.frombuffer(blob, dtype="<f8")
    params = {}
    for full, meta in header["tensors"].items():
        name, key = full.rsplit(".", 1)
        shape = tuple(meta["shape"])
        size = int(np.prod(shape)) if shape else 1
        start = meta["offset"]
        if start + size > flat.size:
            raise ValidationError(f"{path}: truncated blob for tensor {full}")
        arr = flat[start:start + size].reshape(shape).copy()
        params.setdefault(name, {})[key] = arr
    return params
