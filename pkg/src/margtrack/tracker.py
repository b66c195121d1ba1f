"""Online multi-object tracker with marginal-probability association.

Each frame runs two Hungarian matching stages. Stage one fuses an appearance
term with the Kalman Mahalanobis distance, ``w * (1 - P) + (1 - w) * M``, and
rejects matches costlier than ``prob_match_threshold``; stage two matches the
leftovers by IoU. ``P`` is the marginal matching probability by default and
can be swapped for raw cosine similarity or a softmax baseline through
``association_mode``.
"""
from __future__ import annotations

import dataclasses
import enum
import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .affinity import BoundingBox, cosine_similarity_matrix, iou_distance_matrix, normalize, update_track_embedding
from .lap import solve_min_assignment
from .marginal import bidirectional_softmax_probabilities, marginal_association, row_softmax_probabilities
from .motion import CHI2_GATE_4DOF, KalmanFilter, KalmanState
from .table import TrackTable

log = logging.getLogger(__name__)

ASSOCIATION_MODES = ("marginal", "distance", "row_softmax", "bi_softmax")


@dataclass(frozen=True)
class TrackerConfig:
    conf_detect: float = 0.4
    conf_new_track: float = 0.5
    prob_match_threshold: float = 0.8
    iou_match_threshold: float = 0.5
    fusion_weight: float = 0.98
    cg_steps: int = 100
    lost_ttl: int = 30
    ema_momentum: float = 0.9
    distance_scale: float = 1.0
    association_mode: str = "marginal"
    softmax_temperature: float = 0.1
    confirm_tentative: bool = True

    def __post_init__(self):
        for name in ("conf_detect", "conf_new_track", "prob_match_threshold", "iou_match_threshold",
                     "fusion_weight", "ema_momentum"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.cg_steps < 1:
            raise ValueError("cg_steps must be >= 1")
        if self.lost_ttl < 0:
            raise ValueError("lost_ttl must be >= 0")
        if not self.distance_scale > 0:
            raise ValueError("distance_scale must be positive")
        if not self.softmax_temperature > 0:
            raise ValueError("softmax_temperature must be positive")
        if self.association_mode not in ASSOCIATION_MODES:
            raise ValueError(f"association_mode must be one of {ASSOCIATION_MODES}, got {self.association_mode!r}")

    def replace(self, **changes) -> "TrackerConfig":
        return dataclasses.replace(self, **changes)


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    ACTIVE = "active"
    LOST = "lost"
    REMOVED = "removed"


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    embedding: np.ndarray

    @classmethod
    def coerce(cls, item) -> "Detection":
        if isinstance(item, Detection):
            return item
        box, score, emb = item
        if not isinstance(box, BoundingBox):
            box = BoundingBox(*(float(v) for v in box))
        score = float(score)
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"detection score {score} outside [0, 1]")
        emb = np.asarray(emb, dtype=np.float64).reshape(-1)
        return cls(box, score, emb)


@dataclass
class Track:
    id: int
    state: KalmanState
    embedding: np.ndarray
    status: TrackStatus
    last_box: BoundingBox
    score: float
    frames_since_update: int = 0
    hits: int = 1


def fuse_costs(probabilities, mahalanobis, weight: float) -> np.ndarray:
    """``weight * (1 - P) + (1 - weight) * M``, keeping ``inf`` where ``M`` is gated."""
    p = np.asarray(probabilities, dtype=np.float64)
    m = np.asarray(mahalanobis, dtype=np.float64)
    if p.shape != m.shape:
        raise ValueError(f"shape mismatch: P {p.shape} vs M {m.shape}")
    gated = np.isinf(m)
    out = weight * (1.0 - p) + (1.0 - weight) * np.where(gated, 0.0, m)
    out[gated] = np.inf
    return out


def match_stage(costs, threshold: float):
    """Hungarian matching that drops pairs costing more than ``threshold``.

    Returns ``(matches, unmatched_rows, unmatched_cols)``.
    """
    c = np.asarray(costs, dtype=np.float64)
    m, n = c.shape
    if m == 0 or n == 0:
        return [], list(range(m)), list(range(n))
    matches = [(r, k) for r, k in solve_min_assignment(c).pairs if c[r, k] <= threshold]
    used_r = {r for r, _ in matches}
    used_c = {k for _, k in matches}
    return matches, [r for r in range(m) if r not in used_r], [k for k in range(n) if k not in used_c]


class Tracker:
    """Single-writer tracking state machine; call :meth:`step` once per frame."""

    def __init__(self, config: TrackerConfig | None = None, kalman: KalmanFilter | None = None):
        self.config = config or TrackerConfig()
        self.kf = kalman or KalmanFilter(gate=CHI2_GATE_4DOF)
        self.tracks: list[Track] = []
        self._ids = itertools.count(1)
        self._frames_seen = 0

    @property
    def live_tracks(self) -> list[Track]:
        return [t for t in self.tracks if t.status is not TrackStatus.REMOVED]

    def _appearance(self, sim: np.ndarray, gated: np.ndarray) -> np.ndarray:
        cfg = self.config
        if cfg.association_mode == "marginal":
            return marginal_association(sim, steps=cfg.cg_steps, distance_scale=cfg.distance_scale, forbidden=gated)
        if cfg.association_mode == "distance":
            return sim
        if cfg.association_mode == "row_softmax":
            # one track against all detections
            return row_softmax_probabilities(sim.T, cfg.softmax_temperature).T
        return bidirectional_softmax_probabilities(sim, cfg.softmax_temperature)

    def _coerce(self, detections) -> list[Detection]:
        out = []
        for item in detections:
            try:
                out.append(Detection.coerce(item))
            except (ValueError, TypeError) as exc:
                log.warning("skipping malformed detection %r: %s", item, exc)
        return out

    def step(self, frame_index: int, detections) -> list[tuple[int, BoundingBox, float]]:
        cfg = self.config
        first_frame = self._frames_seen == 0
        self._frames_seen += 1
        dets = [d for d in self._coerce(detections) if d.score >= cfg.conf_detect]

        pool = self.live_tracks
        for t, st in zip(pool, self.kf.predict_many([t.state for t in pool])):
            t.state = st

        unmatched_dets = list(range(len(dets)))
        unmatched_trk = list(range(len(pool)))
        matches: list[tuple[int, int]] = []

        if dets and pool:
            det_emb = normalize(np.stack([d.embedding for d in dets]))
            trk_emb = np.stack([t.embedding for t in pool])
            sim = cosine_similarity_matrix(det_emb, trk_emb)
            maha = self.kf.mahalanobis_matrix([t.state for t in pool], [d.box for d in dets])
            prob = self._appearance(sim, np.isinf(maha))
            fused = fuse_costs(prob, maha, cfg.fusion_weight)
            m1, unmatched_dets, unmatched_trk = match_stage(fused, cfg.prob_match_threshold)
            matches.extend(m1)

        if unmatched_dets and unmatched_trk:
            det_boxes = [dets[i].box for i in unmatched_dets]
            trk_boxes = [pool[j].state.to_box() for j in unmatched_trk]
            m2, rest_d, rest_t = match_stage(iou_distance_matrix(det_boxes, trk_boxes), cfg.iou_match_threshold)
            matches.extend((unmatched_dets[r], unmatched_trk[k]) for r, k in m2)
            unmatched_dets = [unmatched_dets[r] for r in rest_d]
            unmatched_trk = [unmatched_trk[k] for k in rest_t]

        emitted: list[Track] = []
        posteriors = self.kf.update_many([pool[tj].state for _, tj in matches], [dets[di].box for di, _ in matches])
        if matches:
            new_embs = update_track_embedding(np.stack([pool[tj].embedding for _, tj in matches]),
                                              np.stack([dets[di].embedding for di, _ in matches]), cfg.ema_momentum)
        for (di, tj), posterior, emb in zip(matches, posteriors, new_embs if matches else []):
            d, t = dets[di], pool[tj]
            t.state = posterior
            t.embedding = emb
            t.last_box = d.box
            t.score = d.score
            t.frames_since_update = 0
            t.hits += 1
            if t.status is TrackStatus.LOST:
                t.status = TrackStatus.ACTIVE if t.hits >= 2 or not cfg.confirm_tentative else TrackStatus.TENTATIVE
            if t.status is TrackStatus.TENTATIVE and (t.hits >= 2 or not cfg.confirm_tentative):
                t.status = TrackStatus.ACTIVE
            if t.status is TrackStatus.ACTIVE:
                emitted.append(t)

        for tj in unmatched_trk:
            t = pool[tj]
            t.frames_since_update += 1
            t.status = TrackStatus.REMOVED if t.frames_since_update > cfg.lost_ttl else TrackStatus.LOST

        for di in unmatched_dets:
            d = dets[di]
            if d.score < cfg.conf_new_track:
                continue
            active = first_frame or not cfg.confirm_tentative
            t = Track(
                id=next(self._ids),
                state=self.kf.initiate(d.box),
                embedding=normalize(d.embedding),
                status=TrackStatus.ACTIVE if active else TrackStatus.TENTATIVE,
                last_box=d.box,
                score=d.score,
            )
            self.tracks.append(t)
            if active:
                emitted.append(t)

        self.tracks = [t for t in self.tracks if t.status is not TrackStatus.REMOVED]
        emitted.sort(key=lambda t: t.id)
        return [(t.id, t.state.to_box(), t.score) for t in emitted]


def run_sequence(frames, config: TrackerConfig | None = None) -> TrackTable:
    """Run a fresh tracker over ``frames``.

    ``frames`` is a sequence of per-frame detection lists (frame index = list
    position) or a mapping ``frame_index -> detections``; missing frames in a
    mapping are fed as empty.
    """
    tracker = Tracker(config)
    if isinstance(frames, dict):
        if frames:
            lo, hi = min(frames), max(frames)
            items = ((f, frames.get(f, [])) for f in range(lo, hi + 1))
        else:
            items = iter(())
    else:
        items = enumerate(frames)
    rows = []
    for f, dets in items:
        for tid, box, score in tracker.step(f, dets):
            rows.append((f, tid, box.x, box.y, box.w, box.h, score))
    return TrackTable.from_rows(rows).sorted()
