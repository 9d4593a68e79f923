"""Two-stage enhancement models and inference.

Stage 1: a small CNN looks at a downsampled copy of the frame and predicts
softmax weights that fuse a bank of five basis LUTs into one frame-adaptive
LUT, which is then applied per pixel. Stage 2: a small U-Net predicts a
residual correction on top. Clamping to [0,1] happens once, at the very end.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..io import Clip, read_lut_cube, write_lut_cube
from ..lut import LutBank, apply_lut_raw, fuse_bank, initial_bank
from ..rand import seeded_rng
from ..resize import resize_bilinear
from ..validation import ValidationError, check_frame


def predictor_spec(k: int = 5) -> nn.ModelSpec:
    """Seven conv blocks (stride 2 on the first five), global average pool,
    1x1 head to k logits, softmax."""
    # channel ladder 3 -> 8 -> 16 -> 32 -> 64 -> 64 -> 64 -> 64
    chans = [3, 8, 16, 32, 64, 64, 64, 64]
    layers = []
    for i in range(7):
        stride = 2 if i < 5 else 1
        layers.append(nn.conv(f"b{i + 1}", chans[i], chans[i + 1], k=3, stride=stride))
        layers.append(nn.leaky_relu(f"b{i + 1}a", alpha=0.2))
    layers.append(nn.avgpool_global("pool"))
    layers.append(nn.conv("head", chans[-1], k, k=1, pad=0))
    layers.append(nn.softmax("weights"))
    return nn.ModelSpec(layers, input_channels=3)


def restorer_spec() -> nn.ModelSpec:
    """Default 21-conv U-Net. Enters at stride 2 (scales 1/2, 1/4, 1/8 of the
    input), channels 16/32/64, two convs per scale on each side, skip concats,
    residual add of the input at the end. Sized to clear the per-frame MAC
    budget at 1280x720 with margin."""
    L = []
    def block(name, c_in, c_out, stride=1):
        L.append(nn.conv(name, c_in, c_out, k=3, stride=stride))
        L.append(nn.relu(name + "r"))
    block("in", 3, 16, stride=2)
    block("enc1a", 16, 16)
    block("enc1b", 16, 16)
    block("down1", 16, 32, stride=2)
    block("enc2a", 32, 32)
    block("enc2b", 32, 32)
    block("down2", 32, 64, stride=2)
    block("enc3a", 64, 64)
    block("enc3b", 64, 64)
    block("bott", 64, 64)
    L.append(nn.concat_skip("cat3", "enc3br"))
    block("dec3a", 128, 64)
    block("dec3b", 64, 64)
    L.append(nn.upsample_nearest("ups2"))
    block("up2", 64, 32)
    L.append(nn.concat_skip("cat2", "enc2br"))
    block("dec2a", 64, 32)
    block("dec2b", 32, 32)
    L.append(nn.upsample_nearest("ups1"))
    block("up1", 32, 16)
    L.append(nn.concat_skip("cat1", "enc1br"))
    block("dec1a", 32, 16)
    block("dec1b", 16, 16)
    L.append(nn.upsample_nearest("ups0"))
    block("up0", 16, 16)
    block("refine", 16, 16)
    L.append(nn.conv("out", 16, 3, k=3))
    L.append(nn.add_skip("res", "input"))
    return nn.ModelSpec(L, input_channels=3)


def restorer_spec_fullres() -> nn.ModelSpec:
    """Same U-Net but entering at full resolution. Deliberately oversized: it
    blows the per-frame MAC budget at 1280x720 and exists as the audit's
    negative example."""
    spec = restorer_spec()
    layers = []
    for l in spec.layers:
        if l.name == "in":
            layers.append(nn.conv("in", 3, 16, k=3, stride=1))
        elif l.name == "ups0":
            continue  # no final upsample when the trunk is full-res
        else:
            layers.append(l)
    return nn.ModelSpec(layers, input_channels=3)


def restorer_spec_residual_chain() -> nn.ModelSpec:
    """Residual-chain alternative: stride-2 stem, seven residual blocks of two
    3x3 convs each at 16 channels, upsample, output conv, input skip."""
    L = [nn.conv("stem", 3, 16, k=3, stride=2), nn.relu("stemr")]
    prev = "stemr"
    for i in range(7):
        L.append(nn.conv(f"rb{i}a", 16, 16, k=3))
        L.append(nn.relu(f"rb{i}ar"))
        L.append(nn.conv(f"rb{i}b", 16, 16, k=3))
        L.append(nn.add_skip(f"rb{i}s", prev))
        L.append(nn.relu(f"rb{i}r"))
        prev = f"rb{i}r"
    L.append(nn.upsample_nearest("ups"))
    L.append(nn.conv("up", 16, 16, k=3))
    L.append(nn.relu("upr"))
    L.append(nn.conv("out", 16, 3, k=3))
    L.append(nn.add_skip("res", "input"))
    return nn.ModelSpec(L, input_channels=3)


RESTORER_PRESETS = {
    "default": restorer_spec,
    "fullres": restorer_spec_fullres,
    "residual_chain": restorer_spec_residual_chain,
}


@dataclass
class StageOneModel:
    bank: LutBank
    predictor_spec: nn.ModelSpec
    predictor_params: dict
    downsample: int = 64

    def __post_init__(self):
        if self.downsample < 4:
            raise ValidationError(f"predictor downsample must be >= 4, got {self.downsample}")

    @property
    def k(self) -> int:
        return self.bank.k

    def predict_weights(self, frames) -> np.ndarray:
        """(b, h, w, 3) frames -> (b, k) softmax weights."""
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim == 3:
            frames = frames[None]
        d = self.downsample
        small = np.stack([resize_bilinear(f, d, d) for f in frames])
        x = small.transpose(0, 3, 1, 2)
        y, _ = nn.forward(self.predictor_spec, self.predictor_params, x)
        return y.reshape(y.shape[0], -1)

    def apply(self, frame) -> np.ndarray:
        """Fused-LUT output for one frame, unclamped."""
        w = self.predict_weights(frame)[0]
        fused = fuse_bank(self.bank, w)
        return apply_lut_raw(fused, frame)


def default_stage1(seed: int = 0, k: int = 5, n: int = 33, downsample: int = 64) -> StageOneModel:
    rng = seeded_rng(seed)
    spec = predictor_spec(k)
    params = nn.init_params(spec, rng)
    bank = initial_bank(k=k, n=n, rng=rng)
    return StageOneModel(bank, spec, params, downsample=downsample)


@dataclass
class StageTwoModel:
    spec: nn.ModelSpec
    params: dict

    def apply(self, frame) -> np.ndarray:
        """Residual restoration of one (h, w, 3) frame, unclamped. Frames are
        replicate-padded to a multiple of 8 so the three downsamples divide
        evenly, then cropped back."""
        frame = np.asarray(frame, dtype=np.float64)
        h, w = frame.shape[:2]
        ph = (-h) % 8
        pw = (-w) % 8
        if ph or pw:
            frame = np.pad(frame, ((0, ph), (0, pw), (0, 0)), mode="edge")
        x = frame.transpose(2, 0, 1)[None]
        y, _ = nn.forward(self.spec, self.params, x)
        out = y[0].transpose(1, 2, 0)
        return out[:h, :w]


def default_stage2(seed: int = 0, preset: str = "default") -> StageTwoModel:
    if preset not in RESTORER_PRESETS:
        raise ValidationError(f"unknown restorer preset {preset!r}")
    spec = RESTORER_PRESETS[preset]()
    params = nn.init_params(spec, seeded_rng(seed))
    return StageTwoModel(spec, params)


def enhance_frame(s1, s2, frame) -> np.ndarray:
    """Full pipeline for one frame; either stage may be None. Single clamp at
    the end."""
    out = check_frame(frame)
    if s1 is not None:
        out = s1.apply(out)
    if s2 is not None:
        out = s2.apply(out)
    return np.clip(out, 0.0, 1.0)


def enhance_clip(s1, s2, clip: Clip):
    """Frame-wise enhancement plus a latency/MACs report."""
    frames = []
    times = []
    for i in range(len(clip)):
        t0 = time.perf_counter()
        frames.append(enhance_frame(s1, s2, clip.frames[i]))
        times.append(time.perf_counter() - t0)
    out = Clip(np.stack(frames), fps=clip.fps, clip_id=clip.clip_id)
    report = {
        "frames": len(clip),
        "mean_seconds": float(np.mean(times)),
        "median_seconds": float(np.median(times)),
        "macs_predictor": 0,
        "macs_restorer": 0,
    }
    if s1 is not None:
        d = s1.downsample
        report["macs_predictor"] = nn.count_macs(s1.predictor_spec, d, d)
    if s2 is not None:
        report["macs_restorer"] = nn.count_macs(s2.spec, clip.height, clip.width)
    report["macs_total"] = report["macs_predictor"] + report["macs_restorer"]
    return out, report


def save_stage1(s1: StageOneModel, dirpath) -> None:
    """Bank as k .cube files plus a JSON index; predictor as spec + checkpoint."""
    os.makedirs(dirpath, exist_ok=True)
    cubes = []
    for i, lut in enumerate(s1.bank.luts):
        name = f"basis_{i}.cube"
        write_lut_cube(lut, os.path.join(dirpath, name))
        cubes.append(name)
    index = {
        "kind": "stage1",
        "cubes": cubes,
        "downsample": s1.downsample,
        "predictor_spec": s1.predictor_spec.to_dict(),
    }
    with open(os.path.join(dirpath, "stage1.json"), "w") as f:
        json.dump(index, f, indent=2)
    nn.save_params(s1.predictor_params, os.path.join(dirpath, "predictor.bin"),
                   model=s1.predictor_spec)


def load_stage1(dirpath) -> StageOneModel:
    with open(os.path.join(dirpath, "stage1.json")) as f:
        index = json.load(f)
    spec = nn.ModelSpec.from_dict(index["predictor_spec"])
    params = nn.load_params(os.path.join(dirpath, "predictor.bin"), model=spec)
    luts = [read_lut_cube(os.path.join(dirpath, name)) for name in index["cubes"]]
    return StageOneModel(LutBank(luts), spec, params, downsample=int(index["downsample"]))


def save_stage2(s2: StageTwoModel, dirpath) -> None:
    os.makedirs(dirpath, exist_ok=True)
    with open(os.path.join(dirpath, "stage2.json"), "w") as f:
        json.dump({"kind": "stage2", "spec": s2.spec.to_dict()}, f, indent=2)
    nn.save_params(s2.params, os.path.join(dirpath, "restorer.bin"), model=s2.spec)


def load_stage2(dirpath) -> StageTwoModel:
    with open(os.path.join(dirpath, "stage2.json")) as f:
        index = json.load(f)
    spec = nn.ModelSpec.from_dict(index["spec"])
    params = nn.load_params(os.path.join(dirpath, "restorer.bin"), model=spec)
    return StageTwoModel(spec, params)
