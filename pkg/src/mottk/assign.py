"""Optimal bipartite assignment and set-prediction losses.

The losses follow the DETR family: a focal classification term, an L1 term
over normalized ``(cx, cy, w, h)`` and a generalized-IoU term, each with its
own weight. Predictions produced for new objects are paired with targets by
minimum-cost assignment; predictions produced for known tracks are paired by
track ID.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from mottk import _kernels
from mottk.errors import ConsistencyError, DomainError, NumericError
from mottk.geometry import BoundingBox, giou

PERSON, BACKGROUND = 0, 1

_NORM_TOL = 1e-6
# probabilities are floored here inside matching costs only, never in losses
_COST_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]
    total_cost: float

    def __len__(self):
        return len(self.pairs)

    def as_dict(self) -> dict[int, int]:
        return dict(self.pairs)


def solve_assignment(costs) -> Assignment:
    """Minimum-total-cost one-to-one matching of size ``min(rows, cols)``.

    Among optimal matchings the lexicographically smallest one is returned:
    lower rows take lower columns first. This makes the result independent of
    the backend and of the solver's internal visiting order.

    Parameters
    ----------
    costs : array_like, shape (rows, cols)
        Finite costs. An empty matrix yields an empty assignment.

    Raises
    ------
    NumericError
        If any entry is NaN or infinite.
    """
    arr = np.asarray(costs, dtype=np.float64)
    if arr.ndim != 2:
        if arr.size == 0:
            return Assignment((), 0.0)
        raise ValueError(f"cost matrix must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        return Assignment((), 0.0)
    if not np.all(np.isfinite(arr)):
        raise NumericError("cost matrix contains non-finite entries")
    rows, cols = _kernels.solve_lsa(arr)
    pairs = tuple((int(r), int(c)) for r, c in zip(rows, cols))
    total = 0.0
    for r, c in pairs:
        total += float(arr[r, c])
    return Assignment(pairs, total)


@dataclass(frozen=True)
class LossWeights:
    lambda_cls: float = 2.0
    lambda_l1: float = 5.0
    lambda_iou: float = 2.0
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0

    def __post_init__(self):
        for name in ("lambda_cls", "lambda_l1", "lambda_iou"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")

    def scaled(self, factor: float) -> "LossWeights":
        return LossWeights(
            self.lambda_cls * factor,
            self.lambda_l1 * factor,
            self.lambda_iou * factor,
            self.focal_alpha,
            self.focal_gamma,
        )


@dataclass(frozen=True)
class Prediction:
    """One decoded query: a normalized ``(cx, cy, w, h)`` box and class scores.

    ``class_scores`` is ``(p_person, p_background)``.
    """

    box: tuple[float, float, float, float]
    class_scores: tuple[float, float]

    def __post_init__(self):
        p = self.class_scores
        if len(p) != 2 or any(not (0.0 <= x <= 1.0) for x in p) or abs(sum(p) - 1.0) > 1e-9:
            raise DomainError(f"class scores must be a probability pair, got {p}")
        _check_normalized(self.box)

    @property
    def p_person(self) -> float:
        return self.class_scores[PERSON]

    @property
    def p_background(self) -> float:
        return self.class_scores[BACKGROUND]


def _check_normalized(box) -> None:
    if len(box) != 4 or any(not (-_NORM_TOL <= v <= 1.0 + _NORM_TOL) for v in box):
        raise DomainError(f"normalized box coordinates must lie in [0, 1], got {tuple(box)}")


def normalize_box(box: BoundingBox, frame_width: float, frame_height: float) -> tuple[float, float, float, float]:
    """ltwh pixels -> normalized (cx, cy, w, h)."""
    cx, cy, w, h = box.to_cxcywh()
    return (cx / frame_width, cy / frame_height, w / frame_width, h / frame_height)


def _to_box(cxcywh) -> BoundingBox:
    return BoundingBox.from_cxcywh(*cxcywh)


def focal_loss(p_true_class: float, alpha: float = 0.25, gamma: float = 2.0) -> float:
    """``-alpha * (1 - p)**gamma * ln(p)`` for the probability of the true class."""
    if not p_true_class > 0 or p_true_class > 1:
        raise DomainError(f"focal loss needs p in (0, 1], got {p_true_class}")
    if p_true_class == 1.0:
        return 0.0
    return -alpha * (1.0 - p_true_class) ** gamma * math.log(p_true_class)


def l1_distance(a, b) -> float:
    return sum(abs(x - y) for x, y in zip(a, b))


def giou_loss(a, b) -> float:
    """``1 - giou`` of two normalized (cx, cy, w, h) boxes."""
    return 1.0 - giou(_to_box(a), _to_box(b))


def match_cost(predictions: Sequence[Prediction], targets: Sequence, weights: LossWeights = LossWeights()) -> np.ndarray:
    """Pairwise matching cost between predictions (rows) and person targets (cols)."""
    for t in targets:
        _check_normalized(t)
    costs = np.zeros((len(predictions), len(targets)))
    for i, pred in enumerate(predictions):
        _check_normalized(pred.box)
        cls = 0.0
        if weights.lambda_cls:
            p = max(pred.p_person, _COST_PROB_FLOOR)
            cls = weights.lambda_cls * focal_loss(p, weights.focal_alpha, weights.focal_gamma)
        for j, target in enumerate(targets):
            entry = cls
            if weights.lambda_l1:
                entry += weights.lambda_l1 * l1_distance(pred.box, target)
            if weights.lambda_iou:
                entry += weights.lambda_iou * giou_loss(pred.box, target)
            costs[i, j] = entry
    return costs


def _matched_term(pred: Prediction, target, weights: LossWeights) -> float:
    return (
        weights.lambda_cls * focal_loss(pred.p_person, weights.focal_alpha, weights.focal_gamma)
        + weights.lambda_l1 * l1_distance(pred.box, target)
        + weights.lambda_iou * giou_loss(pred.box, target)
    )


def _background_term(pred: Prediction, weights: LossWeights) -> float:
    return weights.lambda_cls * focal_loss(pred.p_background, weights.focal_alpha, weights.focal_gamma)


def detection_set_loss(predictions: Sequence[Prediction], new_object_targets: Sequence, weights: LossWeights = LossWeights()) -> float:
    """Loss over object-query predictions against targets that are new in this frame.

    Predictions are matched to targets by minimum-cost assignment; unmatched
    predictions are scored against the background class.
    """
    assignment = solve_assignment(match_cost(predictions, new_object_targets, weights))
    matched = assignment.as_dict()
    total = 0.0
    for i, pred in enumerate(predictions):
        if i in matched:
            total += _matched_term(pred, new_object_targets[matched[i]], weights)
        else:
            total += _background_term(pred, weights)
    return total


def tracking_set_loss(
    predictions_by_track_id: Mapping[int, Prediction],
    persisting_targets_by_track_id: Mapping[int, Optional[tuple]],
    weights: LossWeights = LossWeights(),
) -> float:
    """Loss over track-query predictions, paired with targets by track ID.

    A target value of ``None`` marks a track that left the frame; its
    prediction should decode to background.

    Raises
    ------
    ConsistencyError
        If a prediction's track ID has no entry among the targets.
    """
    total = 0.0
    for track_id in sorted(predictions_by_track_id):
        pred = predictions_by_track_id[track_id]
        if track_id not in persisting_targets_by_track_id:
            raise ConsistencyError(f"prediction for track {track_id} has no originating query")
        target = persisting_targets_by_track_id[track_id]
        if target is None:
            total += _background_term(pred, weights)
        else:
            _check_normalized(target)
            total += _matched_term(pred, target, weights)
    return total


def total_loss(l_det: float, l_trk: float) -> float:
    return l_det + l_trk
