import numpy as np
import pytest

from margtrack.affinity import BoundingBox
from margtrack.metrics import evaluate
from margtrack.table import TrackTable
from margtrack.tracker import (Detection, Tracker, TrackerConfig, TrackStatus, fuse_costs, match_stage,
                               run_sequence)

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])


def det(x, y=0.0, score=0.9, emb=E1, w=20.0, h=40.0):
    return (BoundingBox(x, y, w, h), score, emb)


def test_config_defaults_and_validation():
    c = TrackerConfig()
    assert (c.conf_detect, c.conf_new_track, c.prob_match_threshold, c.iou_match_threshold) == (0.4, 0.5, 0.8, 0.5)
    assert (c.fusion_weight, c.cg_steps, c.lost_ttl, c.ema_momentum) == (0.98, 100, 30, 0.9)
    assert c.distance_scale == 1.0 and c.association_mode == "marginal"
    for bad in (dict(conf_detect=1.5), dict(cg_steps=0), dict(association_mode="nope"), dict(distance_scale=0)):
        with pytest.raises(ValueError):
            TrackerConfig(**bad)
    assert c.replace(lost_ttl=3).lost_ttl == 3


def test_fuse_costs_examples():
    assert fuse_costs([[1.0]], [[0.0]], 0.98)[0, 0] == 0.0
    assert fuse_costs([[0.5]], [[2.0]], 0.98)[0, 0] == pytest.approx(0.53)
    assert np.isinf(fuse_costs([[1.0]], [[np.inf]], 0.98)[0, 0])
    with pytest.raises(ValueError):
        fuse_costs(np.ones((1, 2)), np.ones((2, 1)), 0.5)


def test_match_stage_examples():
    assert match_stage([[0.9, 0.95]], 0.8) == ([], [0], [0, 1])
    assert match_stage([[0.1]], 0.8) == ([(0, 0)], [], [])
    matches, ur, uc = match_stage([[0.1, 0.9], [0.9, 0.1]], 0.5)
    assert sorted(matches) == [(0, 0), (1, 1)] and ur == [] and uc == []
    assert match_stage(np.zeros((0, 3)), 0.5) == ([], [], [0, 1, 2])


def test_empty_frame_without_tracks():
    assert Tracker().step(0, []) == []


def test_first_frame_detection_emitted():
    out = Tracker().step(0, [det(0, score=0.6)])
    assert len(out) == 1 and out[0][0] == 1


def test_low_scores_filtered_and_medium_do_not_spawn():
    tr = Tracker()
    assert tr.step(0, [det(0, score=0.3), det(100, score=0.45)]) == []
    assert tr.tracks == []


def test_new_tracks_after_first_frame_need_confirmation():
    tr = Tracker()
    tr.step(0, [det(0)])
    out = tr.step(1, [det(1), det(300, emb=E2)])
    assert [i for i, *_ in out] == [1]
    out = tr.step(2, [det(2), det(301, emb=E2)])
    assert [i for i, *_ in out] == [1, 2]
    unconfirmed = Tracker(TrackerConfig(confirm_tentative=False))
    unconfirmed.step(0, [det(0)])
    assert len(unconfirmed.step(1, [det(1), det(300, emb=E2)])) == 2


def test_track_removed_after_ttl():
    tr = Tracker()
    tr.step(0, [det(0)])
    for f in range(1, 31):
        tr.step(f, [])
        assert tr.tracks[0].status is TrackStatus.LOST
        assert tr.tracks[0].frames_since_update == f
    tr.step(31, [])
    assert tr.tracks == []


def test_lost_track_recovers_identity():
    tr = Tracker()
    tr.step(0, [det(0), det(400, emb=E2)])
    for f in range(1, 6):
        tr.step(f, [det(400, emb=E2)])
    out = tr.step(6, [det(0), det(400, emb=E2)])
    assert [i for i, *_ in out] == [1, 2]


def test_malformed_detections_skipped(caplog):
    tr = Tracker()
    out = tr.step(0, [det(0), (BoundingBox(0, 0, 1, 1), 2.0, E1), ("bad",)])
    assert len(out) == 1
    assert "malformed" in caplog.text


def test_detection_coerce():
    d = Detection.coerce(((1, 2, 3, 4), 0.5, [1, 0]))
    assert d.box == BoundingBox(1, 2, 3, 4)
    with pytest.raises(ValueError):
        Detection.coerce(((1, 2, 3, 4), -0.1, [1, 0]))


@pytest.mark.parametrize("mode", ["marginal", "distance", "row_softmax", "bi_softmax"])
def test_single_object_single_track(mode):
    frames = [[det(3.0 * f, 2.0 * f)] for f in range(40)]
    table = run_sequence(frames, TrackerConfig(association_mode=mode))
    assert set(table.ids.tolist()) == {1}
    assert len(table) == 40
    gt = TrackTable.from_rows([(f, 1, 3.0 * f, 2.0 * f, 20.0, 40.0) for f in range(40)])
    rep = evaluate(table, gt)
    assert rep.id_switches == 0 and rep.idf1 == 1.0


def test_crossing_objects_keep_identity():
    frames, gt = [], []
    for f in range(60):
        frames.append([det(5.0 * f, 0.0, emb=E1), det(300 - 5.0 * f, 10.0, emb=E2)])
        gt += [(f, 1, 5.0 * f, 0.0, 20.0, 40.0), (f, 2, 300 - 5.0 * f, 10.0, 20.0, 40.0)]
    rep = evaluate(run_sequence(frames), TrackTable.from_rows(gt))
    assert rep.id_switches == 0 and rep.idf1 == 1.0


def test_ids_unique_per_frame_and_deterministic(rng):
    frames = []
    for f in range(30):
        frames.append([det(rng.uniform(0, 500), rng.uniform(0, 500), emb=rng.normal(size=3)) for _ in range(6)])
    a = run_sequence(frames)
    b = run_sequence(frames)
    np.testing.assert_array_equal(a.ids, b.ids)
    np.testing.assert_array_equal(a.boxes, b.boxes)
    a.validate()


def test_run_sequence_accepts_mapping():
    table = run_sequence({0: [det(0)], 2: [det(2)]})
    assert table.frames.tolist() == [0, 2]
    assert len(run_sequence({})) == 0
    assert len(run_sequence([])) == 0
