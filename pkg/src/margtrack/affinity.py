"""Appearance and spatial affinities between detections and tracks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box, top-left corner plus width/height in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (np.isfinite([self.x, self.y, self.w, self.h]).all()):
            raise ValueError(f"non-finite box {self}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box needs positive width and height, got w={self.w}, h={self.h}")

    def tlwh(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)

    def to_xyah(self) -> np.ndarray:
        """Center x, center y, aspect ratio w/h, height."""
        return np.array([self.x + self.w / 2, self.y + self.h / 2, self.w / self.h, self.h], dtype=np.float64)

    @classmethod
    def from_xyah(cls, xyah) -> "BoundingBox":
        cx, cy, a, h = (float(t) for t in xyah)
        w = a * h
        return cls(cx - w / 2, cy - h / 2, w, h)


def _as_tlwh(boxes) -> np.ndarray:
    if isinstance(boxes, np.ndarray):
        arr = np.asarray(boxes, dtype=np.float64)
    else:
        boxes = list(boxes)
        arr = np.array([b.tlwh() if isinstance(b, BoundingBox) else b for b in boxes], dtype=np.float64)
    return arr.reshape(-1, 4)


def _as_matrix(vectors, name: str) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(0, 0) if arr.size == 0 else arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array of embeddings")
    return arr


def normalize(vectors) -> np.ndarray:
    """L2-normalize rows; zero rows are rejected."""
    arr = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    if (norms == 0).any() or not np.isfinite(norms).all():
        raise ValueError("cannot normalize a zero or non-finite embedding")
    return arr / norms


def cosine_similarity_matrix(det_embeddings, track_embeddings) -> np.ndarray:
    """Cosine similarity per (detection, track) pair, clamped to [0, 1]."""
    d = _as_matrix(det_embeddings, "det_embeddings")
    t = _as_matrix(track_embeddings, "track_embeddings")
    if len(d) == 0 or len(t) == 0:
        return np.zeros((len(d), len(t)))
    if d.shape[1] != t.shape[1]:
        raise ValueError(f"embedding dimension mismatch: {d.shape[1]} vs {t.shape[1]}")
    sim = normalize(d) @ normalize(t).T
    return np.clip(sim, 0.0, 1.0)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    return float(iou_matrix([a], [b])[0, 0])


def iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    """Pairwise intersection-over-union of two box collections (tlwh)."""
    a = _as_tlwh(boxes_a)
    b = _as_tlwh(boxes_b)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    ax2 = a[:, 0] + a[:, 2]
    ay2 = a[:, 1] + a[:, 3]
    bx2 = b[:, 0] + b[:, 2]
    by2 = b[:, 1] + b[:, 3]
    iw = np.minimum(ax2[:, None], bx2[None, :]) - np.maximum(a[:, 0, None], b[None, :, 0])
    ih = np.minimum(ay2[:, None], by2[None, :]) - np.maximum(a[:, 1, None], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    return np.clip(inter / union, 0.0, 1.0)


def iou_distance_matrix(dets, tracks) -> np.ndarray:
    return 1.0 - iou_matrix(dets, tracks)


def update_track_embedding(current, observed, momentum: float = 0.9) -> np.ndarray:
    """Exponential moving average of a track's appearance, renormalized.

    Works on single vectors or row-stacked batches.
    """
    cur = np.asarray(current, dtype=np.float64)
    obs = np.asarray(observed, dtype=np.float64)
    if cur.shape != obs.shape:
        raise ValueError(f"embedding dimension mismatch: {cur.shape} vs {obs.shape}")
    if not 0.0 <= momentum <= 1.0:
        raise ValueError("momentum must lie in [0, 1]")
    obs_n = normalize(obs)
    mixed = momentum * normalize(cur) + (1.0 - momentum) * obs_n
    norm = np.linalg.norm(mixed, axis=-1, keepdims=True)
    # antipodal inputs at momentum 0.5 cancel out; fall back to the observation
    safe = np.where(norm == 0, 1.0, norm)
    return np.where(norm == 0, obs_n, mixed / safe)
