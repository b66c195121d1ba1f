"""Columnar table of boxes keyed by (frame, id)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TrackTable:
    """Rows of ``(frame, id, x, y, w, h, score)`` held as parallel arrays.

    Frames are 0-based here; file I/O converts at the boundary.
    """

    frames: np.ndarray
    ids: np.ndarray
    boxes: np.ndarray  # (K, 4) tlwh
    scores: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.int64).reshape(-1)
        self.ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
        self.boxes = np.asarray(self.boxes, dtype=np.float64).reshape(-1, 4)
        self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        n = len(self.frames)
        if not (len(self.ids) == len(self.boxes) == len(self.scores) == n):
            raise ValueError("TrackTable columns must have equal length")

    @classmethod
    def empty(cls) -> "TrackTable":
        return cls(np.zeros(0), np.zeros(0), np.zeros((0, 4)), np.zeros(0))

    @classmethod
    def from_rows(cls, rows) -> "TrackTable":
        """Build from an iterable of ``(frame, id, x, y, w, h[, score])``."""
        rows = [tuple(r) for r in rows]
        if not rows:
            return cls.empty()
        frames = [r[0] for r in rows]
        ids = [r[1] for r in rows]
        boxes = [r[2:6] for r in rows]
        scores = [r[6] if len(r) > 6 else 1.0 for r in rows]
        return cls(frames, ids, boxes, scores)

    def __len__(self) -> int:
        return len(self.frames)

    def rows(self):
        for i in range(len(self)):
            yield (int(self.frames[i]), int(self.ids[i]), *self.boxes[i].tolist(), float(self.scores[i]))

    def sorted(self) -> "TrackTable":
        order = np.lexsort((self.ids, self.frames))
        return TrackTable(self.frames[order], self.ids[order], self.boxes[order], self.scores[order])

    def subset(self, mask) -> "TrackTable":
        return TrackTable(self.frames[mask], self.ids[mask], self.boxes[mask], self.scores[mask])

    def validate(self) -> None:
        """Raise if a (frame, id) pair repeats or a frame is negative."""
        if len(self) == 0:
            return
        if (self.frames < 0).any():
            raise ValueError("frames must be nonnegative")
        keys = np.stack([self.frames, self.ids], axis=1)
        if len(np.unique(keys, axis=0)) != len(keys):
            raise ValueError("duplicate (frame, id) rows")

    def by_frame(self) -> dict[int, np.ndarray]:
        """Row indices grouped per frame."""
        out: dict[int, list] = {}
        for i, f in enumerate(self.frames.tolist()):
            out.setdefault(f, []).append(i)
        return {f: np.array(ix, dtype=np.int64) for f, ix in out.items()}
