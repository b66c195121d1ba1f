"""MOT-style text files, the binary embedding sidecar, and tracker config files.

Frames are 1-based in files and 0-based in memory.

Embedding sidecar layout (little-endian)::

    b"MAEB"  magic
    u32      version (1)
    u64      row count
    u32      dimension
    f32[row count * dimension]  row-major, one row per detection row
"""
from __future__ import annotations

import dataclasses
import struct
import typing
from pathlib import Path

import numpy as np

from ._kv import parse_bool, parse_key_values
from .affinity import BoundingBox
from .table import TrackTable
from .tracker import Detection, TrackerConfig

EMB_MAGIC = b"MAEB"
EMB_VERSION = 1
_HEADER = struct.Struct("<4sIQI")


class FormatError(ValueError):
    """Malformed input file."""


class DetectionRowError(FormatError):
    pass


class BadMagicError(FormatError):
    pass


class RowCountMismatchError(FormatError):
    pass


class DimensionError(FormatError):
    pass


def read_detection_rows(path) -> list[tuple[int, int, float, float, float, float, float]]:
    """Parse ``frame,id,x,y,w,h,score[,...]`` rows (frames stay 1-based)."""
    rows = []
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 7:
            raise DetectionRowError(f"{path}:{lineno}: expected at least 7 fields, got {len(parts)}")
        try:
            frame = int(float(parts[0]))
            ident = int(float(parts[1]))
            x, y, w, h, score = (float(p) for p in parts[2:7])
        except ValueError as exc:
            raise DetectionRowError(f"{path}:{lineno}: {exc}") from None
        if frame < 1:
            raise DetectionRowError(f"{path}:{lineno}: frames are 1-based, got {frame}")
        if not (w > 0 and h > 0):
            raise DetectionRowError(f"{path}:{lineno}: box needs positive width and height")
        rows.append((frame, ident, x, y, w, h, score))
    return rows


def read_embeddings(path) -> np.ndarray:
    """Load the sidecar as a float32 ``(rows, dim)`` array (not normalized)."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise BadMagicError(f"{path}: file too short for an embedding header")
    magic, version, rows, dim = _HEADER.unpack_from(data)
    if magic != EMB_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {EMB_MAGIC!r}")
    if version != EMB_VERSION:
        raise FormatError(f"{path}: unsupported embedding file version {version}")
    payload = len(data) - _HEADER.size
    if rows and dim == 0:
        raise DimensionError(f"{path}: zero embedding dimension")
    if payload != rows * dim * 4:
        raise DimensionError(f"{path}: payload of {payload} bytes does not hold {rows} rows of dim {dim}")
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(rows, dim).copy()


def write_embeddings(path, embeddings) -> None:
    arr = np.asarray(embeddings, dtype="<f4")
    if arr.ndim != 2:
        arr = arr.reshape(len(arr), -1)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(EMB_MAGIC, EMB_VERSION, arr.shape[0], arr.shape[1] if arr.size else 0))
        fh.write(arr.tobytes())


def load_detections(path, embeddings_path) -> dict[int, list[Detection]]:
    """Detections grouped by 0-based frame, each with its normalized embedding."""
    rows = read_detection_rows(path)
    embs = read_embeddings(embeddings_path)
    if len(rows) != len(embs):
        raise RowCountMismatchError(f"{path} has {len(rows)} detection rows but {embeddings_path} has {len(embs)}")
    out: dict[int, list[Detection]] = {}
    for (frame, _, x, y, w, h, score), emb in zip(rows, embs):
        v = emb.astype(np.float64)
        norm = np.linalg.norm(v)
        if norm == 0 or not np.isfinite(norm):
            raise FormatError(f"{embeddings_path}: zero or non-finite embedding for a frame {frame} detection")
        out.setdefault(frame - 1, []).append(Detection(BoundingBox(x, y, w, h), score, v / norm))
    return dict(sorted(out.items()))


def write_detections(path, frames) -> np.ndarray:
    """Write ``frames`` (list of detection lists) as MOT rows; return embeddings in row order."""
    lines = []
    embs = []
    for f, dets in enumerate(frames):
        for d in dets:
            b = d.box
            lines.append(f"{f + 1},-1,{b.x:.3f},{b.y:.3f},{b.w:.3f},{b.h:.3f},{d.score:.4f}")
            embs.append(d.embedding)
    Path(path).write_text("".join(line + "\n" for line in lines))
    return np.array(embs, dtype=np.float64).reshape(len(embs), -1)


def format_results(table: TrackTable) -> str:
    if len(table) and (table.ids <= 0).any():
        raise ValueError("result ids must be positive")
    lines = []
    for frame, ident, x, y, w, h, score in table.sorted().rows():
        lines.append(f"{frame + 1},{ident},{x:.1f},{y:.1f},{w:.1f},{h:.1f},{score:.2f},-1,-1,-1\n")
    return "".join(lines)


def write_results(table: TrackTable, path) -> None:
    """MOT submission rows sorted by (frame, id)."""
    Path(path).write_text(format_results(table))


def read_results(path) -> TrackTable:
    """Read a result or ground-truth file into a 0-based table."""
    rows = read_detection_rows(path)
    return TrackTable.from_rows((f - 1, i, x, y, w, h, s) for f, i, x, y, w, h, s in rows).sorted()


def _convert(field: dataclasses.Field, value: str):
    hint = typing.get_type_hints(TrackerConfig)[field.name]
    if hint is bool:
        return parse_bool(value)
    if hint is int:
        return int(value)
    if hint is float:
        return float(value)
    return value


def config_from_text(text: str, source: str = "<string>") -> TrackerConfig:
    kv = parse_key_values(text, source)
    known = {f.name: f for f in dataclasses.fields(TrackerConfig)}
    kwargs = {}
    for key, value in kv.items():
        if key not in known:
            raise ValueError(f"{source}: unknown config key {key!r}")
        try:
            kwargs[key] = _convert(known[key], value)
        except ValueError as exc:
            raise ValueError(f"{source}: bad value for {key!r}: {exc}") from None
    return TrackerConfig(**kwargs)


def load_config(path) -> TrackerConfig:
    return config_from_text(Path(path).read_text(), str(path))


def format_config(config: TrackerConfig) -> str:
    return "".join(f"{f.name} = {getattr(config, f.name)}\n" for f in dataclasses.fields(config))
