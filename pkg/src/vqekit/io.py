"""Frame, clip, LUT, score-file, and manifest serialization.

Frames travel as binary PPM (P6, maxval 255): codec-free and bit-exact, which
keeps degradation/enhancement experiments reproducible byte for byte. Clips
are directories of frame_%06d.ppm. LUTs use the .cube text format. Scores and
manifests are UTF-8 JSON.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .lut import Lut3D
from .validation import ValidationError, check_frame


@dataclass
class Clip:
    """Ordered frames of uniform size plus playback rate."""

    frames: np.ndarray  # (t, h, w, 3) float64 in [0,1]
    fps: float = 30.0
    clip_id: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim == 3:
            self.frames = self.frames[None]
        if self.frames.ndim != 4 or self.frames.shape[3] != 3:
            raise ValidationError(f"clip frames must be (t, h, w, 3), got {self.frames.shape}")
        if self.frames.shape[0] < 1:
            raise ValidationError("clip needs at least one frame")
        if not np.all(np.isfinite(self.frames)):
            raise ValidationError("clip contains non-finite values")
        if not (self.fps > 0):
            raise ValidationError(f"fps must be positive, got {self.fps}")

    def __len__(self):
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


def quantize_to_bytes(frame) -> np.ndarray:
    """[0,1] scalars to uint8 with round-half-away-from-zero.

    np.round would round half-to-even (127.5 -> 128 but 0.5*255=127.5 must go
    up); floor(v*255 + 0.5) gives the required behavior for nonnegative v.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if np.any(frame < 0.0) or np.any(frame > 1.0):
        raise ValidationError("frame values outside [0,1]; clamp upstream before writing")
    return np.clip(np.floor(frame * 255.0 + 0.5), 0, 255).astype(np.uint8)


def write_ppm(path, frame) -> None:
    """Binary P6, maxval 255."""
    frame = check_frame(frame)
    data = quantize_to_bytes(frame)
    h, w = data.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(data.tobytes())


def read_ppm(path) -> np.ndarray:
    """Decode binary P6 to a (h, w, 3) float64 frame via value/255."""
    with open(path, "rb") as f:
        raw = f.read()
    if not raw.startswith(b"P6"):
        raise ValidationError(f"{path}: not a binary PPM (missing P6 magic)")
    # Header is magic + 3 ints, whitespace separated, with optional comment
    # lines. Scan token by token so any legal header layout parses.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        token = raw[start:pos]
        if not token.isdigit():
            raise ValidationError(f"{path}: malformed PPM header token {token!r}")
        fields.append(int(token))
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ValidationError(f"{path}: only maxval 255 supported, got {maxval}")
    expected = w * h * 3
    body = raw[pos : pos + expected]
    if len(body) != expected:
        raise ValidationError(f"{path}: expected {expected} pixel bytes, got {len(body)}")
    data = np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)
    return data.astype(np.float64) / 255.0


_FRAME_RE = re.compile(r"^frame_(\d{6})\.ppm$")


def frame_filename(index: int) -> str:
    return "frame_%06d.ppm" % index


def write_clip(clip: Clip, path) -> None:
    os.makedirs(path, exist_ok=True)
    for i in range(len(clip)):
        write_ppm(os.path.join(path, frame_filename(i)), clip.frames[i])


def read_clip(path, fps: float = 30.0, clip_id: str = "") -> Clip:
    if not os.path.isdir(path):
        raise ValidationError(f"no such clip directory: {path}")
    indices = {}
    for name in os.listdir(path):
        m = _FRAME_RE.match(name)
        if m:
            indices[int(m.group(1))] = name
    if not indices:
        raise ValidationError(f"no frame_%06d.ppm files in {path}")
    frames = []
    for i in range(len(indices)):
        if i not in indices:
            raise ValidationError(f"index gap at {i}")
        frames.append(read_ppm(os.path.join(path, indices[i])))
    shape = frames[0].shape
    for i, fr in enumerate(frames):
        if fr.shape != shape:
            raise ValidationError(f"frame {i} has shape {fr.shape}, expected {shape}")
    if not clip_id:
        clip_id = os.path.basename(os.path.normpath(path))
    return Clip(np.stack(frames), fps=fps, clip_id=clip_id)


def write_lut_cube(lut: Lut3D, path) -> None:
    """.cube text with red index fastest-varying, 6 decimal places."""
    n = lut.n
    lines = ["LUT_3D_SIZE %d" % n]
    # table is [r, g, b, ch]; file order runs r fastest, then g, then b.
    flat = lut.table.transpose(2, 1, 0, 3).reshape(-1, 3)
    for row in flat:
        lines.append("%.6f %.6f %.6f" % (row[0], row[1], row[2]))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_lut_cube(path) -> Lut3D:
    with open(path) as f:
        text = f.read()
    n = None
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.upper().startswith("LUT_3D_SIZE"):
            parts = line.split()
            if len(parts) != 2 or not parts[1].isdigit():
                raise ValidationError(f"{path}:{lineno}: malformed LUT_3D_SIZE line")
            n = int(parts[1])
            if n < 2:
                raise ValidationError(f"{path}: LUT size must be >= 2, got {n}")
            continue
        if line.upper().startswith(("TITLE", "DOMAIN_MIN", "DOMAIN_MAX", "LUT_1D_SIZE")):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValidationError(f"{path}:{lineno}: expected 3 values, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: non-numeric token in {line!r}")
    if n is None:
        raise ValidationError(f"{path}: missing LUT_3D_SIZE header")
    if len(rows) != n ** 3:
        raise ValidationError(f"{path}: expected {n ** 3} entries, got {len(rows)}")
    flat = np.asarray(rows, dtype=np.float64)
    table = flat.reshape(n, n, n, 3).transpose(2, 1, 0, 3)
    return Lut3D(table)


@dataclass
class ScoreEntry:
    p: float
    aux: np.ndarray

    def __post_init__(self):
        self.aux = np.asarray(self.aux, dtype=np.float64)
        if self.aux.shape != (11,):
            raise ValidationError(f"expected 11 aux scores, got {self.aux.shape}")
        vals = np.concatenate([[self.p], self.aux])
        if not np.all(np.isfinite(vals)):
            raise ValidationError("score values must be finite")
        if np.any(vals < 0.0) or np.any(vals > 1.0):
            raise ValidationError("score values must lie in [0,1]")


@dataclass
class ScoreFile:
    scores: dict = field(default_factory=dict)  # clip_id -> ScoreEntry

    def __post_init__(self):
        for cid, entry in list(self.scores.items()):
            if not isinstance(entry, ScoreEntry):
                self.scores[cid] = ScoreEntry(**entry)


def read_scores(path) -> ScoreFile:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: scores file must be a JSON object")
    scores = {}
    for cid, entry in data.items():
        if not isinstance(entry, dict) or "p" not in entry or "aux" not in entry:
            raise ValidationError(f"{path}: entry {cid!r} needs 'p' and 'aux'")
        try:
            scores[cid] = ScoreEntry(p=float(entry["p"]), aux=entry["aux"])
        except (TypeError, ValueError) as e:
            raise ValidationError(f"{path}: entry {cid!r}: {e}")
    return ScoreFile(scores)


def write_scores(sf: ScoreFile, path) -> None:
    data = {cid: {"p": e.p, "aux": list(map(float, e.aux))} for cid, e in sf.scores.items()}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


_ROLES = ("input", "target", "prediction")


@dataclass
class ManifestEntry:
    clip_id: str
    role: str
    path: str
    fps: float = 30.0

    def __post_init__(self):
        if self.role not in _ROLES:
            raise ValidationError(f"role must be one of {_ROLES}, got {self.role!r}")
        if not (self.fps > 0):
            raise ValidationError(f"fps must be positive, got {self.fps}")


@dataclass
class Manifest:
    entries: list = field(default_factory=list)
    pairing: dict = field(default_factory=dict)  # input clip_id -> target clip_id

    def __post_init__(self):
        ids = [e.clip_id for e in self.entries]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate clip_ids in manifest: {dupes}")
        known = set(ids)
        for a, b in self.pairing.items():
            if a not in known:
                raise ValidationError(f"pairing references unknown clip_id {a!r}")
            if b not in known:
                raise ValidationError(f"pairing references unknown clip_id {b!r}")

    def by_role(self, role: str):
        return [e for e in self.entries if e.role == role]

    def get(self, clip_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.clip_id == clip_id:
                return e
        raise ValidationError(f"no manifest entry for clip_id {clip_id!r}")


def read_manifest(path) -> Manifest:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    # Interchange form is a bare entry array; a wrapped object form carries the
    # optional pairing map alongside.
    if isinstance(data, list):
        raw_entries, pairing = data, {}
    elif isinstance(data, dict) and "entries" in data:
        raw_entries = data["entries"]
        pairing = data.get("pairing") or {}
    else:
        raise ValidationError(f"{path}: manifest must be an entry array or {{entries, pairing}}")
    entries = []
    for i, e in enumerate(raw_entries):
        try:
            entries.append(
                ManifestEntry(
                    clip_id=str(e["clip_id"]),
                    role=str(e["role"]),
                    path=str(e["path"]),
                    fps=float(e.get("fps", 30.0)),
                )
            )
        except KeyError as k:
            raise ValidationError(f"{path}: entry {i} missing field {k}")
    return Manifest(entries, dict(pairing))


def write_manifest(manifest: Manifest, path) -> None:
    payload = {
        "entries": [
            {"clip_id": e.clip_id, "role": e.role, "path": e.path, "fps": e.fps}
            for e in manifest.entries
        ],
    }
    if manifest.pairing:
        payload["pairing"] = dict(manifest.pairing)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
