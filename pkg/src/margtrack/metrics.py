"""CLEAR-MOT and identity metrics for small sequences."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np

from .affinity import iou_matrix
from .lap import solve_min_assignment
from .table import TrackTable


@dataclass(frozen=True)
class MetricsReport:
    mota: float | None  # None when the ground truth is empty
    idf1: float
    fp: int
    fn: int
    id_switches: int
    mostly_tracked: int
    mostly_lost: int
    idtp: int
    idfp: int
    idfn: int
    num_gt: int
    num_pred: int
    num_matches: int
    switches_by_object: tuple[tuple[int, int], ...] = ()  # (gt id, switches) for objects with any

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(predicted: TrackTable, ground_truth: TrackTable, iou_threshold: float = 0.5) -> MetricsReport:
    """Score ``predicted`` against ``ground_truth``.

    Per frame, correspondences from earlier frames are kept while their IoU
    stays at or above ``iou_threshold``; the rest are matched by Hungarian on
    ``1 - IoU``. An identity switch is counted whenever a ground-truth object
    is matched to a different predicted id than at its previous match. IDF1
    uses one global ground-truth-id to predicted-id matching maximizing the
    number of identity-consistent detections.
    """
    predicted.validate()
    ground_truth.validate()
    pred_frames = predicted.by_frame()
    gt_frames = ground_truth.by_frame()

    last_match: dict[int, int] = {}
    fp = fn = idsw = matches_total = 0
    gt_switches: dict[int, int] = defaultdict(int)
    gt_hits: dict[int, int] = defaultdict(int)
    gt_len: dict[int, int] = defaultdict(int)
    overlap: dict[tuple[int, int], int] = defaultdict(int)

    for frame in sorted(set(pred_frames) | set(gt_frames)):
        gi = gt_frames.get(frame, np.zeros(0, dtype=np.int64))
        pi = pred_frames.get(frame, np.zeros(0, dtype=np.int64))
        g_ids = ground_truth.ids[gi]
        p_ids = predicted.ids[pi]
        for g in g_ids.tolist():
            gt_len[g] += 1
        ious = iou_matrix(ground_truth.boxes[gi], predicted.boxes[pi])
        valid = ious >= iou_threshold

        for r, c in zip(*np.nonzero(valid)):
            overlap[(int(g_ids[r]), int(p_ids[c]))] += 1

        pairs: list[tuple[int, int]] = []
        free_g = np.ones(len(gi), dtype=bool)
        free_p = np.ones(len(pi), dtype=bool)
        p_pos = {int(p): c for c, p in enumerate(p_ids)}
        for r, g in enumerate(g_ids.tolist()):
            prev = last_match.get(g)
            c = p_pos.get(prev) if prev is not None else None
            if c is not None and free_p[c] and valid[r, c]:
                pairs.append((r, c))
                free_g[r] = False
                free_p[c] = False
        rest_g = np.flatnonzero(free_g)
        rest_p = np.flatnonzero(free_p)
        if len(rest_g) and len(rest_p):
            sub = np.where(valid[np.ix_(rest_g, rest_p)], 1.0 - ious[np.ix_(rest_g, rest_p)], np.inf)
            for r, c in solve_min_assignment(sub).pairs:
                pairs.append((int(rest_g[r]), int(rest_p[c])))

        for r, c in pairs:
            g, p = int(g_ids[r]), int(p_ids[c])
            if g in last_match and last_match[g] != p:
                idsw += 1
                gt_switches[g] += 1
            last_match[g] = p
            gt_hits[g] += 1
        matches_total += len(pairs)
        fp += len(pi) - len(pairs)
        fn += len(gi) - len(pairs)

    num_gt = len(ground_truth)
    num_pred = len(predicted)
    mota = None if num_gt == 0 else 1.0 - (fp + fn + idsw) / num_gt

    ratios = [gt_hits[g] / n for g, n in gt_len.items()]
    mt = sum(1 for x in ratios if x >= 0.8)
    ml = sum(1 for x in ratios if x < 0.2)

    idtp = _identity_true_positives(overlap)
    idfp = num_pred - idtp
    idfn = num_gt - idtp
    denom = 2 * idtp + idfp + idfn
    idf1 = 1.0 if denom == 0 else 2 * idtp / denom

    return MetricsReport(mota=mota, idf1=idf1, fp=fp, fn=fn, id_switches=idsw, mostly_tracked=mt,
                         mostly_lost=ml, idtp=idtp, idfp=idfp, idfn=idfn, num_gt=num_gt, num_pred=num_pred,
                         num_matches=matches_total, switches_by_object=tuple(sorted(gt_switches.items())))


def _identity_true_positives(overlap: dict[tuple[int, int], int]) -> int:
    if not overlap:
        return 0
    g_ids = sorted({g for g, _ in overlap})
    p_ids = sorted({p for _, p in overlap})
    gi = {g: i for i, g in enumerate(g_ids)}
    pj = {p: j for j, p in enumerate(p_ids)}
    counts = np.zeros((len(g_ids), len(p_ids)))
    for (g, p), n in overlap.items():
        counts[gi[g], pj[p]] = n
    best = solve_min_assignment(counts.max() - counts)
    return int(sum(counts[r, c] for r, c in best.pairs))


def format_report(report: MetricsReport) -> str:
    """Aligned two-column text table."""
    rows = [
        ("MOTA", "n/a" if report.mota is None else f"{report.mota:.4f}"),
        ("IDF1", f"{report.idf1:.4f}"),
        ("FP", str(report.fp)),
        ("FN", str(report.fn)),
        ("IDs", str(report.id_switches)),
        ("MT", str(report.mostly_tracked)),
        ("ML", str(report.mostly_lost)),
        ("IDTP", str(report.idtp)),
        ("IDFP", str(report.idfp)),
        ("IDFN", str(report.idfn)),
        ("GT", str(report.num_gt)),
        ("Pred", str(report.num_pred)),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v:>10}" for k, v in rows)


def report_csv(report: MetricsReport) -> str:
    d = report.as_dict()
    del d["switches_by_object"]
    keys = list(d)
    vals = ["n/a" if d[k] is None else (f"{d[k]:.6f}" if isinstance(d[k], float) else str(d[k])) for k in keys]
    return ",".join(keys) + "\n" + ",".join(vals)
