import math
import time

import numpy as np
import pytest

from mottk.assign import (
    LossWeights,
    Prediction,
    detection_set_loss,
    focal_loss,
    match_cost,
    normalize_box,
    solve_assignment,
    total_loss,
    tracking_set_loss,
)
from mottk.errors import ConsistencyError, DomainError, NumericError
from mottk.geometry import BoundingBox
from oracles import brute_force_assignment


def test_hand_matrices():
    a = solve_assignment([[1, 2], [2, 1]])
    assert a.pairs == ((0, 0), (1, 1)) and a.total_cost == 2
    a = solve_assignment([[4, 1], [2, 3]])
    assert a.pairs == ((0, 1), (1, 0)) and a.total_cost == 3
    a = solve_assignment([[7]])
    assert a.pairs == ((0, 0),) and a.total_cost == 7


def test_empty_and_invalid():
    assert solve_assignment(np.zeros((0, 3))).pairs == ()
    assert solve_assignment(np.zeros((2, 0))).total_cost == 0
    with pytest.raises(NumericError):
        solve_assignment([[0.0, math.nan]])
    with pytest.raises(NumericError):
        solve_assignment([[math.inf]])


def test_ties_resolve_to_lexicographically_smallest():
    assert solve_assignment(np.zeros((3, 3))).pairs == ((0, 0), (1, 1), (2, 2))
    assert solve_assignment([[1, 1, 0], [1, 1, 0]]).pairs == ((0, 0), (1, 2))


def test_brute_force_agreement(rng):
    start = time.perf_counter()
    for k in range(600):
        n, m = (int(x) for x in rng.integers(1, 8, 2))
        cost = rng.integers(0, 5, (n, m)).astype(float) if k % 2 else rng.uniform(-5, 5, (n, m))
        total, pairs = brute_force_assignment(cost.tolist())
        got = solve_assignment(cost)
        assert got.total_cost == total
        assert list(got.pairs) == pairs
        assert len(got.pairs) == min(n, m)
    assert time.perf_counter() - start < 30


def test_shift_and_scale_invariance(rng):
    for _ in range(200):
        n = int(rng.integers(1, 7))
        cost = rng.uniform(0, 1, (n, n))
        base = solve_assignment(cost).pairs
        assert solve_assignment(cost + 3.5).pairs == base
        assert solve_assignment(cost * 7.0).pairs == base


def test_focal_loss_values():
    assert focal_loss(1.0) == 0.0
    assert focal_loss(0.5, alpha=1.0, gamma=0.0) == pytest.approx(math.log(2), abs=1e-12)
    assert focal_loss(0.5, 0.25, 2.0) == pytest.approx(0.25 * 0.25 * math.log(2), abs=1e-12)
    assert focal_loss(0.5, 0.25, 2.0) == pytest.approx(0.0433217, abs=1e-6)
    for p in (0.0, -0.1, 1.5, math.nan):
        with pytest.raises(DomainError):
            focal_loss(p)


def test_focal_loss_monotone():
    ps = np.linspace(0.01, 1.0, 100)
    values = [focal_loss(float(p)) for p in ps]
    assert all(a >= b for a, b in zip(values, values[1:]))


def person(box, p=1.0):
    return Prediction(tuple(box), (p, 1.0 - p))


def test_match_cost_entries():
    same = (0.5, 0.5, 0.2, 0.2)
    assert match_cost([person(same)], [same])[0, 0] == 0.0
    c = match_cost([person((0.5, 0.5, 0.2, 0.2))], [(0.5, 0.5, 0.4, 0.2)], LossWeights(0, 1, 0))
    assert c[0, 0] == pytest.approx(0.2, abs=1e-12)
    assert match_cost([person(same, 0.3)], [same], LossWeights(0, 0, 1))[0, 0] == 0.0
    assert match_cost([], [same]).shape == (0, 1)


def test_normalize_box():
    assert normalize_box(BoundingBox(0, 0, 100, 50), 200, 100) == pytest.approx((0.25, 0.25, 0.5, 0.5))


def test_detection_loss_zero_points():
    same = (0.5, 0.5, 0.2, 0.2)
    background = Prediction(same, (0.0, 1.0))
    assert detection_set_loss([background, background], []) == 0.0
    assert detection_set_loss([person(same)], [same]) == 0.0
    assert detection_set_loss([person(same), background], [same]) == 0.0


def test_detection_loss_composed():
    # xyxy target [0.4,0.6]^2, prediction shifted 0.1 in x: IoU = 1/3 and the
    # enclosing box equals the union, so GIoU = 1/3 as well
    target = (0.5, 0.5, 0.2, 0.2)
    pred = person((0.6, 0.5, 0.2, 0.2))
    expected = 5 * 0.1 + 2 * (1 - 1 / 3)
    assert detection_set_loss([pred], [target]) == pytest.approx(expected, abs=1e-9)


def test_detection_loss_unmatched_prediction_scores_background():
    same = (0.5, 0.5, 0.2, 0.2)
    half = Prediction((0.1, 0.1, 0.1, 0.1), (0.5, 0.5))
    loss = detection_set_loss([person(same), half], [same])
    assert loss == pytest.approx(2 * 0.25 * 0.25 * math.log(2), abs=1e-12)


def test_tracking_loss():
    same = (0.5, 0.5, 0.2, 0.2)
    assert tracking_set_loss({1: person(same)}, {1: same}) == 0.0
    assert tracking_set_loss({4: Prediction(same, (0.0, 1.0))}, {4: None}) == 0.0
    # L1 gap 0.04 in x; IoU = 0.032 / 0.048 = 2/3 and the enclosing box is the union
    pred = person((0.54, 0.5, 0.2, 0.2), 0.9)
    focal = 0.25 * 0.1 ** 2 * -math.log(0.9)
    expected = 2 * focal + 5 * 0.04 + 2 * (1 - 2 / 3)
    assert tracking_set_loss({7: pred}, {7: same}) == pytest.approx(expected, abs=1e-9)
    with pytest.raises(ConsistencyError):
        tracking_set_loss({1: person(same)}, {2: same})


def test_loss_scales_with_weights():
    target = (0.5, 0.5, 0.2, 0.2)
    pred = person((0.55, 0.52, 0.25, 0.2), 0.7)
    w = LossWeights()
    base = detection_set_loss([pred], [target], w)
    assert detection_set_loss([pred], [target], w.scaled(3.0)) == pytest.approx(3 * base, rel=1e-12)


def test_prediction_validation():
    with pytest.raises(DomainError):
        Prediction((0.5, 0.5, 0.2, 0.2), (0.7, 0.7))
    with pytest.raises(DomainError):
        Prediction((1.5, 0.5, 0.2, 0.2), (1.0, 0.0))


def test_total_loss():
    assert total_loss(0, 0) == 0
    assert total_loss(1.5, 2.5) == 4.0
    assert total_loss(0.3, 0) == 0.3
