"""Synthetic tracking sequences and threshold sweeps.

Objects move at constant velocity (optionally with a velocity random walk)
inside a rectangular arena and bounce off its walls. Each identity owns a
fixed unit embedding; every detection carries that embedding plus isotropic
Gaussian noise, so the per-video noise level ``emb_noise`` controls how far
appearance distances drift between videos.
"""
from __future__ import annotations

import concurrent.futures
import csv
import io
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ._kv import parse_key_values
from .affinity import BoundingBox, normalize
from .metrics import evaluate
from .table import TrackTable
from .tracker import Detection, TrackerConfig, run_sequence


@dataclass(frozen=True)
class ScenarioSpec:
    n_objects: int = 20
    n_frames: int = 300
    arena_width: float = 1920.0
    arena_height: float = 1080.0
    box_width: tuple[float, float] = (40.0, 80.0)
    box_height: tuple[float, float] = (100.0, 200.0)
    speed: tuple[float, float] = (1.0, 6.0)
    vel_jitter: float = 0.0
    pos_jitter: float = 1.0
    emb_dim: int = 64
    min_angle_deg: float = 60.0
    emb_noise: float = 0.1
    dropout: float = 0.0
    occlusions: tuple[tuple[int, int, int], ...] = ()  # (object, first frame, last frame), inclusive
    score_range: tuple[float, float] = (0.5, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.n_objects < 0 or self.n_frames < 0:
            raise ValueError("object and frame counts must be nonnegative")
        if self.emb_dim < 1:
            raise ValueError("emb_dim must be >= 1")
        for name in ("vel_jitter", "pos_jitter", "emb_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError("dropout must lie in [0, 1]")
        lo, hi = self.score_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError("score_range must satisfy 0 <= low <= high <= 1")
        for lo, hi in (self.box_width, self.box_height, self.speed):
            if lo > hi or lo < 0:
                raise ValueError("ranges must satisfy 0 <= low <= high")
        if self.box_width[0] <= 0 or self.box_height[0] <= 0:
            raise ValueError("box sizes must be positive")
        if self.box_width[1] >= self.arena_width or self.box_height[1] >= self.arena_height:
            raise ValueError("boxes must fit inside the arena")
        if not 0.0 <= self.min_angle_deg < 180.0:
            raise ValueError("min_angle_deg must lie in [0, 180)")
        for obj, start, end in self.occlusions:
            if not 0 <= obj < self.n_objects:
                raise ValueError(f"occlusion references unknown object {obj}")
            if not 0 <= start <= end < self.n_frames:
                raise ValueError(f"occlusion window {start}-{end} outside 0..{self.n_frames - 1}")


@dataclass
class Sequence:
    """Per-frame detections plus ground truth (0-based frames, ids from 1)."""

    frames: list[list[Detection]]
    ground_truth: TrackTable
    spec: ScenarioSpec


def identity_embeddings(rng: np.random.Generator, n: int, dim: int, min_angle_deg: float,
                        max_tries: int = 10_000) -> np.ndarray:
    """``n`` unit vectors with pairwise angles of at least ``min_angle_deg``."""
    max_cos = np.cos(np.deg2rad(min_angle_deg))
    out = np.zeros((n, dim))
    k = 0
    tries = 0
    while k < n:
        tries += 1
        if tries > max_tries * max(n, 1):
            raise ValueError(f"could not place {n} embeddings {min_angle_deg} degrees apart in {dim} dims")
        v = normalize(rng.standard_normal(dim))
        if k and (out[:k] @ v).max() > max_cos:
            continue
        out[k] = v
        k += 1
    return out


def random_occlusions(rng: np.random.Generator, n_objects: int, n_frames: int, fraction: float = 0.3,
                      length: tuple[int, int] = (5, 20)) -> tuple[tuple[int, int, int], ...]:
    """One occlusion window for ``round(fraction * n_objects)`` distinct objects."""
    count = int(round(fraction * n_objects))
    objs = np.sort(rng.choice(n_objects, size=count, replace=False)) if count else []
    out = []
    for obj in objs:
        span = int(rng.integers(length[0], length[1] + 1))
        start = int(rng.integers(1, max(2, n_frames - span)))
        out.append((int(obj), start, min(n_frames - 1, start + span - 1)))
    return tuple(out)


def generate_sequence(spec: ScenarioSpec) -> Sequence:
    rng = np.random.default_rng(spec.seed)
    n, t_len = spec.n_objects, spec.n_frames
    true_emb = identity_embeddings(rng, n, spec.emb_dim, spec.min_angle_deg)

    w = rng.uniform(*spec.box_width, size=n)
    h = rng.uniform(*spec.box_height, size=n)
    x = rng.uniform(0, spec.arena_width - w)
    y = rng.uniform(0, spec.arena_height - h)
    heading = rng.uniform(0, 2 * np.pi, size=n)
    speed = rng.uniform(*spec.speed, size=n)
    vx, vy = speed * np.cos(heading), speed * np.sin(heading)

    hidden = np.zeros((t_len, n), dtype=bool)
    for obj, start, end in spec.occlusions:
        hidden[start:end + 1, obj] = True

    frames: list[list[Detection]] = []
    gt_rows = []
    for f in range(t_len):
        if f:
            vx = vx + rng.normal(0, spec.vel_jitter, size=n) if spec.vel_jitter else vx
            vy = vy + rng.normal(0, spec.vel_jitter, size=n) if spec.vel_jitter else vy
            x, vx = _bounce(x + vx, vx, spec.arena_width - w)
            y, vy = _bounce(y + vy, vy, spec.arena_height - h)
        # draw every random quantity for every object so dropouts do not
        # shift the stream of later draws
        noise_xy = rng.normal(0, spec.pos_jitter, size=(n, 2))
        emb_noise = rng.normal(0, spec.emb_noise, size=(n, spec.emb_dim))
        scores = rng.uniform(*spec.score_range, size=n)
        dropped = rng.random(n) < spec.dropout
        order = rng.permutation(n)

        dets = []
        for i in order:
            gt_rows.append((f, i + 1, x[i], y[i], w[i], h[i], 1.0))
            if hidden[f, i] or dropped[i]:
                continue
            dx = float(np.clip(x[i] + noise_xy[i, 0], 0, spec.arena_width - w[i]))
            dy = float(np.clip(y[i] + noise_xy[i, 1], 0, spec.arena_height - h[i]))
            emb = normalize(true_emb[i] + emb_noise[i]) if spec.emb_noise else true_emb[i].copy()
            dets.append(Detection(BoundingBox(dx, dy, float(w[i]), float(h[i])), float(scores[i]), emb))
        frames.append(dets)
    return Sequence(frames=frames, ground_truth=TrackTable.from_rows(gt_rows).sorted(), spec=spec)


def crossing_sequence(occlusion_length: int = 14, n_frames: int = 80, emb_noise: float = 0.1,
                      seed: int = 0) -> Sequence:
    """Two objects walking towards each other; object 1 vanishes behind object 2.

    Object 1 moves right, object 2 moves left on a slightly lower line, and
    object 1 emits no detection for ``occlusion_length`` frames centred on
    the moment they overlap.
    """
    if occlusion_length < 0 or occlusion_length >= n_frames:
        raise ValueError("occlusion_length must lie in [0, n_frames)")
    mid = n_frames // 2
    start = mid - occlusion_length // 2
    spec = ScenarioSpec(n_objects=2, n_frames=n_frames, arena_width=1000.0, arena_height=600.0,
                        emb_noise=emb_noise, pos_jitter=1.0, seed=seed,
                        occlusions=((0, start, start + occlusion_length - 1),) if occlusion_length else ())
    rng = np.random.default_rng(seed)
    true_emb = identity_embeddings(rng, 2, spec.emb_dim, spec.min_angle_deg)
    speed = 4.0
    w, h = 50.0, 120.0
    meet = 500.0 - w / 2
    frames, gt_rows = [], []
    for f in range(n_frames):
        xs = (meet - speed * (mid - f), meet + speed * (mid - f))
        ys = (200.0, 215.0)
        jitter = rng.normal(0, spec.pos_jitter, size=(2, 2))
        noise = rng.normal(0, emb_noise, size=(2, spec.emb_dim))
        scores = rng.uniform(*spec.score_range, size=2)
        dets = []
        for i in range(2):
            gt_rows.append((f, i + 1, xs[i], ys[i], w, h, 1.0))
            if i == 0 and start <= f < start + occlusion_length:
                continue
            box = BoundingBox(xs[i] + jitter[i, 0], ys[i] + jitter[i, 1], w, h)
            emb = normalize(true_emb[i] + noise[i]) if emb_noise else true_emb[i].copy()
            dets.append(Detection(box, float(scores[i]), emb))
        frames.append(dets)
    return Sequence(frames=frames, ground_truth=TrackTable.from_rows(gt_rows).sorted(), spec=spec)


def _bounce(pos: np.ndarray, vel: np.ndarray, upper: np.ndarray):
    pos = pos.copy()
    vel = vel.copy()
    low = pos < 0
    pos[low] = -pos[low]
    vel[low] = -vel[low]
    high = pos > upper
    pos[high] = 2 * upper[high] - pos[high]
    vel[high] = -vel[high]
    return np.clip(pos, 0, upper), vel


def make_suite(noises=(0.05, 0.1, 0.2, 0.3, 0.4), seed: int = 0, occluded_fraction: float = 0.3,
               occlusion_length: tuple[int, int] = (5, 20), **overrides) -> list[ScenarioSpec]:
    """One spec per noise level, each with its own seed and random occlusions."""
    base = ScenarioSpec(**overrides)
    ss = np.random.SeedSequence(seed)
    specs = []
    for noise, child in zip(noises, ss.spawn(len(noises))):
        rng = np.random.default_rng(child)
        occl = random_occlusions(rng, base.n_objects, base.n_frames, occluded_fraction, occlusion_length)
        specs.append(replace(base, emb_noise=float(noise), occlusions=occl, seed=int(rng.integers(2**31))))
    return specs


@dataclass
class SweepResult:
    mode: str
    thresholds: np.ndarray
    idf1: np.ndarray  # (videos, thresholds)
    mota: np.ndarray
    id_switches: np.ndarray
    names: list[str] = field(default_factory=list)

    @property
    def optimal_thresholds(self) -> np.ndarray:
        """Per video, the lowest grid threshold reaching that video's best IDF1."""
        return self.thresholds[np.argmax(self.idf1, axis=1)]

    @property
    def spread(self) -> float:
        opt = self.optimal_thresholds
        return float(opt.max() - opt.min())

    @property
    def mean_idf1(self) -> np.ndarray:
        return self.idf1.mean(axis=0)

    @property
    def best_global_threshold(self) -> float:
        return float(self.thresholds[int(np.argmax(self.mean_idf1))])

    def idf1_at(self, threshold: float) -> np.ndarray:
        j = int(np.argmin(np.abs(self.thresholds - threshold)))
        if not np.isclose(self.thresholds[j], threshold):
            raise ValueError(f"threshold {threshold} is not on the grid")
        return self.idf1[:, j]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "threshold", "sequence", "IDF1", "MOTA", "IDs"])
        for v, name in enumerate(self.names):
            for j, thr in enumerate(self.thresholds):
                mota = self.mota[v, j]
                w.writerow([self.mode, f"{thr:.4f}", name, f"{self.idf1[v, j]:.6f}",
                            "n/a" if np.isnan(mota) else f"{mota:.6f}", int(self.id_switches[v, j])])
        return buf.getvalue()


def threshold_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive grid ``start, start + step, ..., stop`` rounded to 10 decimals."""
    if step <= 0 or stop < start:
        raise ValueError("grid needs step > 0 and stop >= start")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 10)


def _sweep_cell(args):
    seq, cfg = args
    rep = evaluate(run_sequence(seq.frames, cfg), seq.ground_truth)
    return rep.idf1, np.nan if rep.mota is None else rep.mota, rep.id_switches


def threshold_sweep(sequences, association_mode: str, grid, base_config: TrackerConfig | None = None,
                    jobs: int = 1) -> SweepResult:
    """Track every sequence at every stage-one threshold and record IDF1/MOTA/IDs.

    ``jobs > 1`` spreads the (sequence, threshold) cells over worker processes;
    results do not depend on ``jobs``.
    """
    sequences = list(sequences)
    if len(sequences) < 2:
        raise ValueError("a sweep needs at least two sequences")
    grid = np.asarray(grid, dtype=np.float64)
    cfg = (base_config or TrackerConfig()).replace(association_mode=association_mode)
    cells = [(seq, cfg.replace(prob_match_threshold=float(thr))) for seq in sequences for thr in grid]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_sweep_cell, cells))
    else:
        out = [_sweep_cell(c) for c in cells]
    shape = (len(sequences), len(grid))
    idf1 = np.array([o[0] for o in out]).reshape(shape)
    mota = np.array([o[1] for o in out], dtype=np.float64).reshape(shape)
    ids = np.array([o[2] for o in out], dtype=np.int64).reshape(shape)
    names = [f"seq{v:02d}_noise{s.spec.emb_noise:g}" for v, s in enumerate(sequences)]
    return SweepResult(association_mode, grid, idf1, mota, ids, names)


_SCALAR_KEYS = {
    "objects": ("n_objects", int),
    "frames": ("n_frames", int),
    "arena_width": ("arena_width", float),
    "arena_height": ("arena_height", float),
    "vel_jitter": ("vel_jitter", float),
    "pos_jitter": ("pos_jitter", float),
    "emb_dim": ("emb_dim", int),
    "min_angle": ("min_angle_deg", float),
    "dropout": ("dropout", float),
    "seed": ("seed", int),
}
_RANGE_KEYS = {"box_width": "box_width", "box_height": "box_height", "speed": "speed", "score": "score_range"}
_SUITE_KEYS = {"emb_noise", "occlusions", "occluded_fraction", "occlusion_length"}


def _pair(value: str) -> tuple[float, float]:
    parts = [p.strip() for p in value.replace(":", ",").split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'low, high', got {value!r}")
    return float(parts[0]), float(parts[1])


def _parse_occlusions(value: str) -> tuple[tuple[int, int, int], ...]:
    out = []
    for item in filter(None, (s.strip() for s in value.split(";"))):
        obj, span = item.split(":")
        start, end = span.split("-")
        out.append((int(obj), int(start), int(end)))
    return tuple(out)


def specs_from_text(text: str, source: str = "<string>") -> list[ScenarioSpec]:
    """Scenario file to one spec per video.

    ``emb_noise`` takes a comma list; each entry becomes one video. Explicit
    ``occlusions = obj:first-last; ...`` apply to every video, otherwise
    ``occluded_fraction``/``occlusion_length`` draw random windows per video.
    """
    kv = parse_key_values(text, source)
    base: dict = {}
    for key, value in kv.items():
        if key in _SCALAR_KEYS:
            name, conv = _SCALAR_KEYS[key]
            base[name] = conv(value)
        elif key in _RANGE_KEYS:
            base[_RANGE_KEYS[key]] = _pair(value)
        elif key not in _SUITE_KEYS:
            raise ValueError(f"{source}: unknown scenario key {key!r}")
    noises = [float(v) for v in kv.get("emb_noise", "0.1").split(",") if v.strip()]
    if "occlusions" in kv:
        occl = _parse_occlusions(kv["occlusions"])
        seed = base.pop("seed", 0)
        return [ScenarioSpec(**base, emb_noise=nz, occlusions=occl, seed=seed + i) for i, nz in enumerate(noises)]
    fraction = float(kv.get("occluded_fraction", "0"))
    length = tuple(int(v) for v in _pair(kv.get("occlusion_length", "5,20")))
    seed = base.pop("seed", 0)
    return make_suite(noises, seed=seed, occluded_fraction=fraction, occlusion_length=length, **base)


def spec_field_names() -> list[str]:
    return [f.name for f in fields(ScenarioSpec)]
