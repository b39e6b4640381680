import numpy as np
import pytest

from helpers import gt_entry, res_entry
from mottk.errors import UndefinedMetricError
from mottk.metrics import (
    FrameCorrespondence,
    clear_match,
    compute_clear,
    compute_idf1,
    evaluate,
    format_keyvalue,
    format_table,
    merge_reports,
)
from mottk.geometry import BoundingBox

A, B, FAR = (0, 0, 10, 10), (100, 0, 10, 10), (500, 500, 10, 10)


def test_identical_sets():
    gt = [gt_entry(f, i, (i * 50, f, 10, 10)) for f in range(1, 6) for i in (1, 2)]
    res = [res_entry(e.frame, e.track_id + 10, e.box.as_tuple()) for e in gt]
    r = evaluate(gt, res)
    assert (r.fp, r.fn, r.idsw, r.mota, r.idf1) == (0, 0, 0, 1.0, 1.0)
    assert r.mt == 2 and r.ml == 0


def test_id_swap_counts_two_switches():
    gt = [gt_entry(f, 1, A) for f in (1, 2)] + [gt_entry(f, 2, B) for f in (1, 2)]
    res = [res_entry(1, 10, A), res_entry(1, 20, B), res_entry(2, 20, A), res_entry(2, 10, B)]
    assert compute_clear(gt, res).idsw == 2


def test_single_frame_correspondence():
    c = clear_match(FrameCorrespondence(), {1: BoundingBox(*A)}, {})
    assert c.unmatched_gt == (1,) and c.matches == {}


def test_mota_micro_case():
    # 10 GT boxes over 5 frames, 2 missed, 1 false positive, no switches
    gt = [gt_entry(f, i, A if i == 1 else B) for f in range(1, 6) for i in (1, 2)]
    res = [res_entry(f, 7, A) for f in range(1, 6)] + [res_entry(f, 8, B) for f in range(1, 4)]
    res.append(res_entry(2, 9, FAR))
    c = compute_clear(gt, res)
    assert (c.gt_total, c.fp, c.fn, c.idsw) == (10, 1, 2, 0)
    assert c.mota == pytest.approx(0.7, abs=1e-12)


def test_empty_results():
    gt = [gt_entry(f, 1, A) for f in range(1, 4)]
    r = evaluate(gt, [])
    assert r.mota == 0.0 and r.fn == r.gt_total == 3 and r.idf1 == 0.0 and r.ml == 1


def test_idf1_micro_case():
    gt = [gt_entry(f, 1, A) for f in range(1, 11)]
    res = [res_entry(f, 4, A) for f in range(1, 6)]
    r = evaluate(gt, res)
    assert (r.idtp, r.idfn, r.idfp) == (5, 5, 0)
    assert r.idf1 == pytest.approx(2 / 3, abs=1e-12)
    assert compute_idf1(gt, res) == pytest.approx(2 / 3, abs=1e-12)


def test_idf1_uses_a_single_identity_per_track():
    gt = [gt_entry(f, 1, A) for f in range(1, 11)]
    res = [res_entry(f, 4 if f <= 6 else 5, A) for f in range(1, 11)]
    r = evaluate(gt, res)
    assert (r.idtp, r.idfn, r.idfp) == (6, 4, 4)
    assert r.idsw == 1


def test_distractor_matches_are_dropped():
    gt = [gt_entry(1, 1, A), gt_entry(1, 2, B, cls=8)]
    res = [res_entry(1, 1, A), res_entry(1, 2, B)]
    r = evaluate(gt, res)
    assert (r.fp, r.fn, r.gt_total) == (0, 0, 1)


def test_zero_flag_entries_are_ignored():
    gt = [gt_entry(1, 1, A), gt_entry(1, 2, B, flag=0.0)]
    assert evaluate(gt, [res_entry(1, 1, A)]).gt_total == 1


def test_no_ground_truth_is_undefined():
    with pytest.raises(UndefinedMetricError):
        evaluate([], [res_entry(1, 1, A)])
    with pytest.raises(UndefinedMetricError):
        compute_idf1([], [])


def _random_case(rng):
    gt, res = [], []
    for f in range(1, 16):
        for g in range(1, 5):
            if rng.random() < 0.85:
                box = (g * 60.0 + f, 10.0, 40.0, 80.0)
                gt.append(gt_entry(f, g, box))
                if rng.random() < 0.8:
                    jitter = rng.uniform(-8, 8, 2)
                    res.append(res_entry(f, int(rng.integers(1, 6)), (box[0] + jitter[0], box[1] + jitter[1], 40.0, 80.0)))
        if rng.random() < 0.3:
            res.append(res_entry(f, 9, (900.0, 900.0, 30.0, 30.0)))
    return gt, res


def test_hypothesis_relabelling_invariance(rng):
    for _ in range(30):
        gt, res = _random_case(rng)
        relabel = {i: 100 + int(j) for i, j in zip(range(1, 10), rng.permutation(9))}
        moved = [res_entry(e.frame, relabel[e.track_id], e.box.as_tuple()) for e in res]
        a, b = evaluate(gt, res), evaluate(gt, moved)
        assert (a.mota, a.idf1, a.fp, a.fn, a.idsw) == (b.mota, b.idf1, b.fp, b.fn, b.idsw)


def test_mota_identity_on_random_cases(rng):
    for _ in range(50):
        gt, res = _random_case(rng)
        r = evaluate(gt, res)
        assert r.mota == pytest.approx(1 - (r.fp + r.fn + r.idsw) / r.gt_total, abs=1e-12)
        assert r.idtp + r.idfn == r.gt_total and r.idtp + r.idfp == r.hyp_total


def test_merge_and_formatting():
    gt = [gt_entry(f, 1, A) for f in range(1, 11)]
    one = evaluate(gt, [res_entry(f, 4, A) for f in range(1, 6)], name="S1")
    two = evaluate(gt, [res_entry(f, 4, A) for f in range(1, 11)], name="S2")
    merged = merge_reports([one, two])
    assert merged.gt_total == 20 and merged.fn == 5
    assert merged.mota == pytest.approx(0.75)
    table = format_table(merged).splitlines()
    assert table[0].split() == ["Sequence", "MOTA", "IDF1", "MT", "ML", "FP", "FN", "IDsw", "GT"]
    assert [row.split()[0] for row in table[1:]] == ["S1", "S2", "OVERALL"]
    kv = format_keyvalue(merged)
    assert "[OVERALL]\nmota = 0.750000\n" in kv
    assert kv == format_keyvalue(merge_reports([one, two]))
