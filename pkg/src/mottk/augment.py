"""Training-sample generation for a candidate-refining tracker.

A sample pairs a previous and a current frame of ground truth with:

* jittered candidates for previous-frame tracks, each overlapping its
  same-ID current box with IoU >= 0.5 when that box exists;
* false-positive candidates with IoU < 0.5 against all current boxes;
* a set of persisting IDs withheld from the candidates (false negatives),
  which the model must re-detect as new objects.

Frame pairs come either from two frames of a video a few frames apart or
from one still image viewed through two random scale/translate transforms.
Samples serialize to JSON lines.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from mottk.errors import DomainError, InvalidBoxError, OutOfFrameError, SamplingExhausted
from mottk.geometry import BoundingBox, FrameGeometry, iou, iou_matrix, patch_region

MIN_IOU_KEEP = 0.5


@dataclass(frozen=True)
class JitterConfig:
    max_center_shift: float = 0.1
    max_scale_change: float = 0.2
    min_iou_keep: float = MIN_IOU_KEEP
    max_attempts: int = 50

    def __post_init__(self):
        if self.max_center_shift < 0 or self.max_scale_change < 0:
            raise ValueError("jitter fractions must be non-negative")
        if self.max_scale_change >= 1:
            raise ValueError("max_scale_change must be < 1")
        if self.min_iou_keep != MIN_IOU_KEEP:
            raise ValueError("min_iou_keep is fixed at 0.5")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class AugmentConfig:
    jitter: JitterConfig = JitterConfig()
    drop_prob: float = 0.1
    max_false_positives: int = 3
    max_gap: int = 3
    # per-view similarity for still-image pairs; small, like inter-frame motion
    scale_range: tuple[float, float] = (0.95, 1.05)
    # fraction of the frame size
    translate_range: tuple[float, float] = (-0.02, 0.02)
    image_pair_prob: float = 0.5

    def __post_init__(self):
        if not 0 <= self.drop_prob <= 1:
            raise ValueError("drop_prob must lie in [0, 1]")
        if not 0 <= self.image_pair_prob <= 1:
            raise ValueError("image_pair_prob must lie in [0, 1]")
        if self.max_false_positives < 0:
            raise ValueError("max_false_positives must be >= 0")
        if self.max_gap < 1:
            raise ValueError("max_gap must be >= 1")
        if not 0 < self.scale_range[0] <= self.scale_range[1]:
            raise ValueError("scale_range must be positive and ordered")
        if self.translate_range[0] > self.translate_range[1]:
            raise ValueError("translate_range must be ordered")


def sample_seed(base_seed: int, index: int) -> int:
    """Per-sample seed: ``base_seed XOR index``."""
    return (int(base_seed) ^ int(index)) & 0xFFFFFFFFFFFFFFFF


# strict margins so an independent IoU implementation agrees at the boundary
_KEEP_MARGIN = 1e-9


def _perturbations(boxes: np.ndarray, config: JitterConfig, rng: np.random.Generator) -> np.ndarray:
    """``max_attempts`` jittered copies per ``(left, top, w, h)`` row, shape ``(n, attempts, 4)``.

    One draw of shape ``(n, attempts, 4)`` consumes the generator exactly as
    ``n`` consecutive per-box draws would.
    """
    s, c = config.max_center_shift, config.max_scale_change
    u = rng.uniform(0.0, 1.0, (len(boxes), config.max_attempts, 4))
    l, t, bw, bh = (boxes[:, i : i + 1] for i in range(4))
    cx, cy = l + bw / 2, t + bh / 2
    w = bw * (1 - c + 2 * c * u[..., 2])
    h = bh * (1 - c + 2 * c * u[..., 3])
    x = cx + (2 * u[..., 0] - 1) * s * bw - w / 2
    y = cy + (2 * u[..., 1] - 1) * s * bh - h / 2
    return np.stack([x, y, w, h], axis=-1)


def _paired_iou(draws: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """IoU of every draw ``(n, k, 4)`` against its row's target ``(n, 4)``."""
    t = targets[:, None, :]
    l1, t1, r1, b1 = draws[..., 0], draws[..., 1], draws[..., 0] + draws[..., 2], draws[..., 1] + draws[..., 3]
    l2, t2, r2, b2 = t[..., 0], t[..., 1], t[..., 0] + t[..., 2], t[..., 1] + t[..., 3]
    iw = np.clip(np.minimum(r1, r2) - np.maximum(l1, l2), 0.0, None)
    ih = np.clip(np.minimum(b1, b2) - np.maximum(t1, t2), 0.0, None)
    inter = iw * ih
    return inter / ((r1 - l1) * (b1 - t1) + (r2 - l2) * (b2 - t2) - inter)


def _jitter_many(prev: Sequence[BoundingBox], targets: Sequence[Optional[BoundingBox]], config: JitterConfig, rng) -> list[BoundingBox]:
    for box in prev:
        if not box.is_valid():
            raise InvalidBoxError(f"cannot jitter {box}")
    if not prev or (config.max_center_shift == 0 and config.max_scale_change == 0):
        return list(prev)
    draws = _perturbations(np.array([b.as_tuple() for b in prev]), config, rng)
    # missing targets compare against themselves so the mask stays rectangular
    ref = np.array([(t if t is not None else p).as_tuple() for p, t in zip(prev, targets)])
    ok = _paired_iou(draws, ref) >= config.min_iou_keep + _KEEP_MARGIN
    out = []
    for i, (p, t) in enumerate(zip(prev, targets)):
        if t is None:
            out.append(BoundingBox(*(float(v) for v in draws[i, 0])))
            continue
        hits = np.flatnonzero(ok[i])
        out.append(BoundingBox(*(float(v) for v in draws[i, hits[0]])) if hits.size else p)
    return out


def jitter_candidate(
    gt_box_prev: BoundingBox,
    gt_box_curr_same_id: Optional[BoundingBox],
    config: JitterConfig,
    rng: np.random.Generator,
) -> BoundingBox:
    """Shift and rescale a previous-frame box within the configured domain.

    All ``max_attempts`` draws are taken up front. With a same-ID current
    box, the first draw overlapping it with IoU >= 0.5 is returned, and the
    unjittered box when none does.
    """
    return _jitter_many([gt_box_prev], [gt_box_curr_same_id], config, rng)[0]


def inject_false_positive(
    all_gt_boxes_curr: Sequence[BoundingBox],
    frame: FrameGeometry,
    config: JitterConfig,
    rng: np.random.Generator,
) -> BoundingBox:
    """Draw an in-frame box overlapping every current GT box with IoU < 0.5.

    Sizes follow a random GT box rescaled by the jitter scale range (or a
    tenth to a third of the frame when there is no GT). All ``max_attempts``
    draws are taken up front and the first valid one is returned.

    Raises
    ------
    SamplingExhausted
        When no draw satisfies the constraint.
    """
    W, H = float(frame.frame_width), float(frame.frame_height)
    n = config.max_attempts
    c = config.max_scale_change
    if all_gt_boxes_curr:
        sizes = np.array([(b.width, b.height) for b in all_gt_boxes_curr])
        pick = rng.integers(len(sizes), size=n)
        w = sizes[pick, 0] * rng.uniform(1.0 - c, 1.0 + c, n)
        h = sizes[pick, 1] * rng.uniform(1.0 - c, 1.0 + c, n)
    else:
        w = rng.uniform(0.1, 1.0 / 3.0, n) * W
        h = rng.uniform(0.1, 1.0 / 3.0, n) * H
    w, h = np.minimum(w, W), np.minimum(h, H)
    left = rng.uniform(0.0, 1.0, n) * (W - w)
    top = rng.uniform(0.0, 1.0, n) * (H - h)
    draws = np.column_stack([left, top, w, h])
    if not all_gt_boxes_curr:
        return BoundingBox(*(float(v) for v in draws[0]))
    worst = iou_matrix(draws, list(all_gt_boxes_curr)).max(axis=1)
    ok = np.flatnonzero(worst < MIN_IOU_KEEP - _KEEP_MARGIN)
    if ok.size == 0:
        raise SamplingExhausted(f"no false positive found in {n} attempts")
    return BoundingBox(*(float(v) for v in draws[ok[0]]))


def remove_false_negatives(persisting_ids: Iterable[int], drop_prob: float, rng: np.random.Generator) -> set[int]:
    """Drop each persisting ID independently with probability ``drop_prob``."""
    if not 0 <= drop_prob <= 1:
        raise DomainError("drop_prob must lie in [0, 1]")
    ids = sorted(persisting_ids)
    draws = rng.random(len(ids))
    return {i for i, u in zip(ids, draws) if u < drop_prob}


def _transform_view(gt_boxes: Mapping[int, BoundingBox], frame: FrameGeometry, scale: float, dx: float, dy: float) -> dict[int, BoundingBox]:
    cx, cy = frame.frame_width / 2.0, frame.frame_height / 2.0
    view = {}
    for tid, b in sorted(gt_boxes.items()):
        if scale == 1.0:
            moved = BoundingBox(b.left + dx, b.top + dy, b.width, b.height)
        else:
            moved = BoundingBox(
                cx + scale * (b.left - cx) + dx,
                cy + scale * (b.top - cy) + dy,
                scale * b.width,
                scale * b.height,
            )
        try:
            view[tid] = patch_region(moved, frame)
        except OutOfFrameError:
            continue
    return view


def synthesize_pair_from_image(
    gt_boxes: Sequence[BoundingBox] | Mapping[int, BoundingBox],
    frame: FrameGeometry,
    scale_range: tuple[float, float],
    translate_range: tuple[float, float],
    rng: np.random.Generator,
) -> tuple[dict[int, BoundingBox], dict[int, BoundingBox]]:
    """Two views of one annotated still image, as a pseudo frame pair.

    Each view scales all boxes about the frame center by one factor and
    shifts them by one offset (``translate_range`` is a fraction of the frame
    size), then clamps to the frame. Boxes clamped to nothing are dropped.
    Boxes given as a sequence get IDs 1..n.
    """
    if not isinstance(gt_boxes, Mapping):
        gt_boxes = {i + 1: b for i, b in enumerate(gt_boxes)}
    views = []
    for _ in range(2):
        scale = rng.uniform(*scale_range) if scale_range[0] != scale_range[1] else scale_range[0]
        if translate_range[0] != translate_range[1]:
            fx, fy = rng.uniform(*translate_range, 2)
        else:
            fx = fy = translate_range[0]
        views.append(_transform_view(gt_boxes, frame, scale, fx * frame.frame_width, fy * frame.frame_height))
    return views[0], views[1]


def select_frame_pair(sequence_length: int, max_gap: int, rng: np.random.Generator) -> tuple[int, int]:
    """Uniform ordered pair ``(k - g, k)`` of 1-based frames with ``1 <= g <= max_gap``."""
    if sequence_length < 2:
        raise DomainError("need at least two frames to form a pair")
    if max_gap < 1:
        raise DomainError("max_gap must be >= 1")
    gap_max = min(max_gap, sequence_length - 1)
    # pairs with gap g: sequence_length - g of them
    counts = [sequence_length - g for g in range(1, gap_max + 1)]
    pick = int(rng.integers(sum(counts)))
    for g, n in enumerate(counts, start=1):
        if pick < n:
            return pick + 1, pick + 1 + g
        pick -= n
    raise AssertionError("unreachable")


@dataclass
class TrainingSample:
    previous: dict[int, BoundingBox]
    current: dict[int, BoundingBox]
    candidates: dict[int, BoundingBox]
    false_positives: list[BoundingBox]
    removed_ids: set[int]
    provenance: dict = field(default_factory=dict)

    @property
    def new_object_ids(self) -> list[int]:
        """Current IDs the model must detect from scratch (new plus withheld)."""
        return sorted((set(self.current) - set(self.previous)) | self.removed_ids)

    def to_json(self) -> str:
        def boxes(d):
            return {str(k): list(v.as_tuple()) for k, v in sorted(d.items())}

        return json.dumps(
            {
                "provenance": self.provenance,
                "previous": boxes(self.previous),
                "current": boxes(self.current),
                "candidates": boxes(self.candidates),
                "false_positives": [list(b.as_tuple()) for b in self.false_positives],
                "removed_ids": sorted(self.removed_ids),
                "new_object_ids": self.new_object_ids,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "TrainingSample":
        raw = json.loads(line)

        def boxes(d):
            return {int(k): BoundingBox(*v) for k, v in d.items()}

        return cls(
            previous=boxes(raw["previous"]),
            current=boxes(raw["current"]),
            candidates=boxes(raw["candidates"]),
            false_positives=[BoundingBox(*b) for b in raw["false_positives"]],
            removed_ids=set(raw["removed_ids"]),
            provenance=raw["provenance"],
        )


def build_sample(
    previous: Mapping[int, BoundingBox],
    current: Mapping[int, BoundingBox],
    frame: FrameGeometry,
    config: AugmentConfig,
    rng: np.random.Generator,
    provenance: Optional[dict] = None,
) -> TrainingSample:
    """Candidates, false positives and withheld IDs for one frame pair.

    A persisting track whose jitter falls back to a box that still misses
    the 0.5 IoU bound (fast motion over a long gap) is withheld like a
    false negative rather than emitted as a bad candidate.
    """
    persisting = set(previous) & set(current)
    removed = remove_false_negatives(persisting, config.drop_prob, rng)
    candidates: dict[int, BoundingBox] = {}
    ids = [tid for tid in sorted(previous) if tid not in removed]
    jittered = _jitter_many([previous[t] for t in ids], [current.get(t) for t in ids], config.jitter, rng)
    for tid, box in zip(ids, jittered):
        target = current.get(tid)
        if target is not None and iou(box, target) < MIN_IOU_KEEP + _KEEP_MARGIN:
            removed.add(tid)
            continue
        candidates[tid] = box
    fps = []
    curr_boxes = [current[k] for k in sorted(current)]
    n_fp = int(rng.integers(config.max_false_positives + 1)) if config.max_false_positives else 0
    for _ in range(n_fp):
        try:
            fps.append(inject_false_positive(curr_boxes, frame, config.jitter, rng))
        except SamplingExhausted:
            break
    return TrainingSample(dict(previous), dict(current), candidates, fps, removed, dict(provenance or {}))


@dataclass(frozen=True)
class AnnotatedSequence:
    """Ground truth of one sequence: frame -> {track id: box}."""

    name: str
    frame: FrameGeometry
    length: int
    boxes: dict[int, dict[int, BoundingBox]]


def generate_samples(
    sequences: Sequence[AnnotatedSequence],
    count: int,
    base_seed: int,
    config: AugmentConfig = AugmentConfig(),
) -> Iterable[TrainingSample]:
    """Yield ``count`` samples; sample ``i`` uses seed ``base_seed ^ i``."""
    usable = [s for s in sequences if s.length >= 2]
    if not usable:
        raise DomainError("no sequence with at least two frames")
    for index in range(count):
        seed = sample_seed(base_seed, index)
        rng = np.random.default_rng(seed)
        seq = usable[int(rng.integers(len(usable)))]
        if rng.random() < config.image_pair_prob:
            frame_no = int(rng.integers(1, seq.length + 1))
            prev, curr = synthesize_pair_from_image(
                seq.boxes.get(frame_no, {}), seq.frame, config.scale_range, config.translate_range, rng
            )
            prov = {"source": "image", "sequence": seq.name, "frame": frame_no, "seed": seed, "index": index}
        else:
            a, b = select_frame_pair(seq.length, config.max_gap, rng)
            prev, curr = seq.boxes.get(a, {}), seq.boxes.get(b, {})
            prov = {"source": "video", "sequence": seq.name, "frames": [a, b], "seed": seed, "index": index}
        yield build_sample(prev, curr, seq.frame, config, rng, prov)


def _overlap(a, b) -> float:
    # deliberately independent of mottk.geometry: validators must not share
    # code with the generator they check
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    ix = max(0.0, min(ax0 + aw, bx0 + bw) - max(ax0, bx0))
    iy = max(0.0, min(ay0 + ah, by0 + bh) - max(ay0, by0))
    inter = ix * iy
    return inter / (aw * ah + bw * bh - inter)


def validate_sample(sample: TrainingSample, frame: Optional[FrameGeometry] = None) -> list[str]:
    """Return a list of constraint violations (empty when the sample is valid)."""
    problems = []
    prev, curr = sample.previous, sample.current
    for tid, box in sample.candidates.items():
        if tid not in prev:
            problems.append(f"candidate {tid} has no previous-frame track")
        if tid in sample.removed_ids:
            problems.append(f"candidate {tid} is also withheld")
        if tid in curr:
            value = _overlap(box.as_tuple(), curr[tid].as_tuple())
            if not value >= 0.5:
                problems.append(f"candidate {tid}: IoU {value:.4f} < 0.5 with its current box")
    for tid in sample.removed_ids:
        if tid not in prev or tid not in curr:
            problems.append(f"withheld id {tid} is not present in both frames")
    for k, fp in enumerate(sample.false_positives):
        for tid, g in curr.items():
            value = _overlap(fp.as_tuple(), g.as_tuple())
            if not value < 0.5:
                problems.append(f"false positive {k}: IoU {value:.4f} >= 0.5 with track {tid}")
        if frame is not None:
            l, t, w, h = fp.as_tuple()
            if l < 0 or t < 0 or l + w > frame.frame_width + 1e-9 or t + h > frame.frame_height + 1e-9:
                problems.append(f"false positive {k} leaves the frame")
    return problems
