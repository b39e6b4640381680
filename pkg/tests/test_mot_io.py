import io
import os
from pathlib import Path

import numpy as np
import pytest

from mottk.errors import ConsistencyError, ParseError
from mottk.geometry import BoundingBox
from mottk.mot_io import (
    AnnotatedTrackEntry,
    Detection,
    MotKind,
    SequenceInfo,
    atomic_write_text,
    format_seqinfo,
    load_sequence,
    parse_mot_file,
    read_mot_file,
    read_seqinfo,
    write_detections,
    write_ground_truth,
    write_results,
)

MOT17_ROOT = os.environ.get("MOTTK_MOT17_ROOT")


def test_parse_detection_line():
    (e,) = parse_mot_file("1,-1,10.5,20.0,30.0,60.0,0.9,-1,-1,-1\n", MotKind.DETECTIONS)
    assert e.frame == 1 and e.track_id == -1
    assert e.box == BoundingBox(10.5, 20, 30, 60)
    assert e.confidence == 0.9
    assert e.to_detection() == Detection(1, BoundingBox(10.5, 20, 30, 60), 0.9)


@pytest.mark.parametrize("kind", [MotKind.RESULTS, MotKind.DETECTIONS])
def test_nine_columns_rejected_for_results_and_detections(kind):
    with pytest.raises(ParseError, match="line 1"):
        parse_mot_file("1,7,0,0,10,10,1,1,1.0\n", kind, source="x.txt")


def test_ground_truth_layouts():
    (nine,) = parse_mot_file("3,7,1,2,10,20,1,1,0.75\n", MotKind.GROUND_TRUTH)
    assert nine.class_id == 1 and nine.visibility == 0.75 and nine.is_evaluated
    (ten,) = parse_mot_file("3,7,1,2,10,20,1,-1,-1,-1\n", MotKind.GROUND_TRUTH)
    assert ten.class_id == -1 and ten.is_evaluated
    (ignored,) = parse_mot_file("3,7,1,2,10,20,0,1,1\n", MotKind.GROUND_TRUTH)
    assert not ignored.is_evaluated
    (distractor,) = parse_mot_file("3,7,1,2,10,20,1,8,1\n", MotKind.GROUND_TRUTH)
    assert distractor.is_distractor and not distractor.is_evaluated


def test_empty_and_blank_lines():
    assert parse_mot_file("", MotKind.RESULTS) == []
    assert len(parse_mot_file("\n1,1,0,0,1,1,1,-1,-1,-1\n\n", MotKind.RESULTS)) == 1


@pytest.mark.parametrize(
    "line, message",
    [
        ("0,1,0,0,1,1,1,-1,-1,-1", "frame must be >= 1"),
        ("1.5,1,0,0,1,1,1,-1,-1,-1", "integer"),
        ("1,1,nan,0,1,1,1,-1,-1,-1", "not a number"),
        ("1,1,inf,0,1,1,1,-1,-1,-1", "not a number"),
        ("1,1,0,0,1,,1,-1,-1,-1", "not a number"),
        ("1,1,0,0,1,1,1,-1,-1", "columns"),
    ],
)
def test_malformed_lines(line, message):
    with pytest.raises(ParseError, match=message):
        parse_mot_file("1,1,0,0,1,1,1,-1,-1,-1\n" + line + "\n", MotKind.RESULTS)
    try:
        parse_mot_file("1,1,0,0,1,1,1,-1,-1,-1\n" + line + "\n", MotKind.RESULTS, source="f.txt")
    except ParseError as exc:
        assert "f.txt" in str(exc) and "line 2" in str(exc)


def test_detection_rules():
    with pytest.raises(ParseError, match="id -1"):
        parse_mot_file("1,3,0,0,1,1,0.5,-1,-1,-1\n", MotKind.DETECTIONS)
    with pytest.raises(ParseError, match="area"):
        parse_mot_file("1,-1,0,0,0,1,0.5,-1,-1,-1\n", MotKind.DETECTIONS)


def test_results_writer_ordering():
    box = BoundingBox(1, 2, 3, 4)
    text = write_results({1: [(7, box)]})
    assert text == "1,7,1.00,2.00,3.00,4.00,1,-1,-1,-1\n"
    (e,) = parse_mot_file(text, MotKind.RESULTS)
    assert (e.frame, e.track_id, e.box) == (1, 7, box)
    lines = write_results({2: [(5, box)], 1: [(5, box)]}).splitlines()
    assert [l.split(",")[0] for l in lines] == ["1", "2"]
    lines = write_results({1: [(3, box), (1, box)]}).splitlines()
    assert [l.split(",")[1] for l in lines] == ["1", "3"]
    with pytest.raises(ConsistencyError):
        write_results({1: [(3, box), (3, box)]})


def _random_tracks(rng):
    out = {}
    for frame in rng.choice(np.arange(1, 50), size=rng.integers(0, 6), replace=False):
        ids = rng.choice(np.arange(1, 100), size=rng.integers(1, 6), replace=False)
        out[int(frame)] = [
            (int(i), BoundingBox(*(round(float(x), 2) for x in (*rng.uniform(-50, 1900, 2), *rng.uniform(0.01, 400, 2)))))
            for i in ids
        ]
    return out


def test_results_round_trip(rng):
    for _ in range(300):
        tracks = _random_tracks(rng)
        parsed = parse_mot_file(write_results(tracks), MotKind.RESULTS)
        got = {(e.frame, e.track_id): e.box for e in parsed}
        want = {(f, i): b for f, items in tracks.items() for i, b in items}
        assert got == want


def test_ground_truth_and_detection_round_trip():
    gt = [
        AnnotatedTrackEntry(2, 1, BoundingBox(1.25, 2, 3, 4), 1.0, (1.0, 0.5)),
        AnnotatedTrackEntry(1, 2, BoundingBox(0, 0, 10, 10), 0.0, (7.0, 1.0)),
    ]
    back = parse_mot_file(write_ground_truth(gt), MotKind.GROUND_TRUTH)
    assert back == sorted(gt, key=lambda e: (e.frame, e.track_id))
    dets = [Detection(1, BoundingBox(1, 2, 3, 4), 0.8125), Detection(1, BoundingBox(5, 6, 7, 8), 1.0)]
    back = [e.to_detection() for e in parse_mot_file(write_detections(dets), MotKind.DETECTIONS)]
    assert back == dets


def _write_sequence(root: Path, with_gt=True, with_det=True):
    atomic_write_text(root / "seqinfo.ini", format_seqinfo(SequenceInfo("S1", 3, 25, 640, 480)))
    if with_det:
        atomic_write_text(root / "det" / "det.txt", "1,-1,0,0,10,10,0.9,-1,-1,-1\n")
    if with_gt:
        atomic_write_text(root / "gt" / "gt.txt", "1,1,0,0,10,10,1,1,1\n")


def test_load_sequence_layouts(tmp_path):
    _write_sequence(tmp_path / "a")
    bundle = load_sequence(tmp_path / "a")
    assert bundle.info == SequenceInfo("S1", 3, 25.0, 640, 480)
    assert len(bundle.detections) == 1 and bundle.ground_truth is not None
    _write_sequence(tmp_path / "b", with_gt=False)
    assert load_sequence(tmp_path / "b").ground_truth is None
    _write_sequence(tmp_path / "c", with_det=False)
    with pytest.raises(FileNotFoundError, match="det.txt"):
        load_sequence(tmp_path / "c")


def test_seqinfo_errors(tmp_path):
    p = tmp_path / "seqinfo.ini"
    p.write_text("[Sequence]\nname=x\n")
    with pytest.raises(ParseError, match="seqLength"):
        read_seqinfo(p)
    p.write_text("no section\n")
    with pytest.raises(ParseError):
        read_seqinfo(p)


def test_atomic_write_replaces_without_leftovers(tmp_path):
    target = tmp_path / "out" / "r.txt"
    atomic_write_text(target, "one\n")
    atomic_write_text(target, "two\n")
    assert target.read_text() == "two\n"
    assert sorted(p.name for p in target.parent.iterdir()) == ["r.txt"]


@pytest.mark.skipif(not MOT17_ROOT, reason="set MOTTK_MOT17_ROOT to a local MOT17 train directory")
def test_real_mot17_ground_truth_parses():
    files = sorted(Path(MOT17_ROOT).glob("*/gt/gt.txt"))
    assert files
    for f in files:
        entries = read_mot_file(f, MotKind.GROUND_TRUTH)
        assert entries and all(e.frame >= 1 for e in entries)
