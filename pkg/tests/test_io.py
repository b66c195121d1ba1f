import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from margtrack.io import (BadMagicError, DetectionRowError, DimensionError, RowCountMismatchError, config_from_text,
                          format_config, format_results, load_config, load_detections, read_embeddings, read_results,
                          write_embeddings, write_results)
from margtrack.table import TrackTable
from margtrack.tracker import TrackerConfig


def test_single_detection_round_trip(tmp_path):
    (tmp_path / "d.txt").write_text("1,-1,912.0,484.0,97.0,109.0,0.9\n")
    write_embeddings(tmp_path / "e.bin", [[3.0, 4.0]])
    frames = load_detections(tmp_path / "d.txt", tmp_path / "e.bin")
    assert list(frames) == [0]
    (d,) = frames[0]
    assert (d.box.x, d.box.y, d.box.w, d.box.h, d.score) == (912.0, 484.0, 97.0, 109.0, 0.9)
    np.testing.assert_allclose(d.embedding, [0.6, 0.8], rtol=1e-6)


def test_empty_files(tmp_path):
    (tmp_path / "d.txt").write_text("")
    write_embeddings(tmp_path / "e.bin", np.zeros((0, 8)))
    assert load_detections(tmp_path / "d.txt", tmp_path / "e.bin") == {}


def test_grouping_by_frame(tmp_path):
    (tmp_path / "d.txt").write_text("2,-1,0,0,5,5,0.9\n1,-1,0,0,5,5,0.8\n2,-1,9,9,5,5,0.7,1,1\n")
    write_embeddings(tmp_path / "e.bin", np.eye(3))
    frames = load_detections(tmp_path / "d.txt", tmp_path / "e.bin")
    assert sorted(frames) == [0, 1]
    assert [d.score for d in frames[1]] == [0.9, 0.7]
    np.testing.assert_allclose(frames[1][1].embedding, [0, 0, 1])


def test_count_mismatch(tmp_path):
    (tmp_path / "d.txt").write_text("1,-1,0,0,5,5,0.9\n1,-1,1,0,5,5,0.9\n2,-1,0,0,5,5,0.9\n")
    write_embeddings(tmp_path / "e.bin", np.ones((2, 4)))
    with pytest.raises(RowCountMismatchError):
        load_detections(tmp_path / "d.txt", tmp_path / "e.bin")


def test_bad_magic_and_dimension_errors(tmp_path):
    p = tmp_path / "e.bin"
    p.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(BadMagicError):
        read_embeddings(p)
    write_embeddings(p, np.ones((2, 4)))
    p.write_bytes(p.read_bytes()[:-4])
    with pytest.raises(DimensionError):
        read_embeddings(p)
    p.write_bytes(struct.pack("<4sIQI", b"MAEB", 1, 3, 4) + np.ones(8, "<f4").tobytes())
    with pytest.raises(DimensionError):
        read_embeddings(p)


def test_malformed_rows_report_line(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("1,-1,0,0,5,5,0.9\n\n1,-1,zero,0,5,5,0.9\n")
    with pytest.raises(DetectionRowError, match=":3:"):
        read_results(p)
    p.write_text("1,-1,0,0,5\n")
    with pytest.raises(DetectionRowError, match=":1:"):
        read_results(p)
    p.write_text("0,-1,0,0,5,5,0.9\n")
    with pytest.raises(DetectionRowError):
        read_results(p)


def test_embedding_file_layout(tmp_path):
    p = tmp_path / "e.bin"
    write_embeddings(p, [[1.0, 2.0, 3.0]])
    raw = p.read_bytes()
    assert raw[:4] == b"MAEB"
    assert struct.unpack_from("<IQI", raw, 4) == (1, 1, 3)
    np.testing.assert_array_equal(np.frombuffer(raw[20:], "<f4"), [1, 2, 3])


def test_results_sorted_and_formatted(tmp_path):
    t = TrackTable.from_rows([(3, 2, 1.26, 2, 3, 4, 0.456), (0, 5, 0, 0, 1, 1, 1.0), (0, 1, 0, 0, 1, 1, 0.5)])
    text = format_results(t)
    assert text.splitlines() == [
        "1,1,0.0,0.0,1.0,1.0,0.50,-1,-1,-1",
        "1,5,0.0,0.0,1.0,1.0,1.00,-1,-1,-1",
        "4,2,1.3,2.0,3.0,4.0,0.46,-1,-1,-1",
    ]
    write_results(TrackTable.empty(), tmp_path / "empty.txt")
    assert (tmp_path / "empty.txt").read_text() == ""
    with pytest.raises(ValueError):
        format_results(TrackTable.from_rows([(0, 0, 0, 0, 1, 1)]))


rows = st.lists(st.tuples(st.integers(0, 50), st.integers(1, 30), st.floats(-500, 2000), st.floats(-500, 2000),
                          st.floats(0.1, 500), st.floats(0.1, 500), st.floats(0, 1)),
                unique_by=lambda r: (r[0], r[1]), max_size=40)


@settings(max_examples=100, deadline=None)
@given(rows)
def test_property_results_round_trip(tmp_path_factory, rs):
    path = tmp_path_factory.mktemp("rt") / "r.txt"
    t = TrackTable.from_rows(rs)
    write_results(t, path)
    back = read_results(path)
    assert format_results(back) == path.read_text()
    np.testing.assert_allclose(back.boxes, np.round(t.sorted().boxes, 1), atol=0.051)


def test_config_text(tmp_path):
    cfg = config_from_text("# comment\nprob_match_threshold = 0.7\nassociation_mode = distance\n"
                           "confirm_tentative = false\ncg_steps = 20\n")
    assert cfg == TrackerConfig(prob_match_threshold=0.7, association_mode="distance", confirm_tentative=False,
                                cg_steps=20)
    with pytest.raises(ValueError, match="unknown config key"):
        config_from_text("threshold = 0.5\n")
    with pytest.raises(ValueError):
        config_from_text("cg_steps = many\n")
    with pytest.raises(ValueError, match="duplicate"):
        config_from_text("cg_steps = 1\ncg_steps = 2\n")
    p = tmp_path / "c.cfg"
    p.write_text(format_config(TrackerConfig()))
    assert load_config(p) == TrackerConfig()
