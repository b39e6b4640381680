"""Frame-by-frame tracking state machine.

Each step propagates every live track (active, and inactive within the
re-birth window) through its motion model to get one candidate per track,
hands the candidates to a refiner, and applies the refiner's verdicts:

* a refined box re-activates the track (keeping its ID) and corrects the
  filter with that box;
* background makes the track inactive, or ages it if it already was, and
  tracks older than the window are dropped;
* leftover boxes reported by the refiner become new tracks with fresh IDs.

The refiner is the seam where a learned decoder would plug in. The shipped
:class:`AssociationRefiner` gates Hungarian matches on IoU against the
frame's detections, i.e. plain tracking-by-detection.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Protocol, Sequence

from mottk.assign import solve_assignment
from mottk.errors import DegeneratePredictionError, OutOfFrameError, SequencingError
from mottk.geometry import BoundingBox, FrameGeometry, iou_matrix, patch_region
from mottk.mot_io import Detection
from mottk.motion import KalmanState, NoiseConfig, kf_init, kf_predict, kf_update

log = logging.getLogger(__name__)


class TrackStatus(enum.Enum):
    ACTIVE = "active"
    INACTIVE = "inactive"


@dataclass(frozen=True)
class Track:
    track_id: int
    box: BoundingBox
    kalman: KalmanState
    status: TrackStatus = TrackStatus.ACTIVE
    inactive_age: int = 0
    last_seen_frame: int = 0

    @property
    def is_active(self) -> bool:
        return self.status is TrackStatus.ACTIVE


@dataclass(frozen=True)
class TrackCandidate:
    track_id: int
    predicted_box: BoundingBox
    # frame crop for the candidate; None when no frame geometry is configured
    patch: Optional[BoundingBox] = None
    inactive: bool = False


@dataclass(frozen=True)
class TrackerConfig:
    rebirth_window: int = 30
    detection_capacity: int = 500
    match_iou_threshold: float = 0.5
    min_confidence: float = 0.4
    noise: NoiseConfig = NoiseConfig()
    frame: Optional[FrameGeometry] = None

    def __post_init__(self):
        if self.rebirth_window < 0:
            raise ValueError("rebirth_window must be >= 0")
        if self.detection_capacity < 1:
            raise ValueError("detection_capacity must be >= 1")
        if not 0 < self.match_iou_threshold < 1:
            raise ValueError("match_iou_threshold must lie in (0, 1)")
        if not 0 <= self.min_confidence <= 1:
            raise ValueError("min_confidence must lie in [0, 1]")


@dataclass(frozen=True)
class RefinerOutput:
    """Per-candidate outcomes (a box, or ``None`` for background) plus new objects."""

    outcomes: tuple[Optional[BoundingBox], ...]
    new_objects: tuple[Detection, ...] = ()


class Refiner(Protocol):
    def __call__(
        self, frame_index: int, candidates: Sequence[TrackCandidate], detections: Sequence[Detection]
    ) -> RefinerOutput: ...


def association_refiner(candidates: Sequence[TrackCandidate], detections: Sequence[Detection], config: TrackerConfig) -> RefinerOutput:
    """Hungarian association on ``1 - IoU`` between candidates and detections.

    Matches with IoU at or above ``config.match_iou_threshold`` refine their
    candidate to the detection box; everything else is background (for
    candidates) or a new object (for detections).
    """
    outcomes: list[Optional[BoundingBox]] = [None] * len(candidates)
    used = [False] * len(detections)
    if candidates and detections:
        overlap = iou_matrix([c.predicted_box for c in candidates], [d.box for d in detections])
        assignment = solve_assignment(1.0 - overlap)
        for row, col in assignment.pairs:
            if overlap[row, col] >= config.match_iou_threshold:
                outcomes[row] = detections[col].box
                used[col] = True
    new_objects = tuple(d for d, u in zip(detections, used) if not u)
    return RefinerOutput(tuple(outcomes), new_objects)


class AssociationRefiner:
    """:func:`association_refiner` bound to a config, usable as a ``Refiner``."""

    def __init__(self, config: TrackerConfig = TrackerConfig()):
        self.config = config

    def __call__(self, frame_index, candidates, detections):
        return association_refiner(candidates, detections, self.config)


@dataclass(frozen=True)
class TrackerState:
    tracks: tuple[Track, ...] = ()
    next_id: int = 1
    frame_index: Optional[int] = None
    born: int = 0
    reborn: int = 0

    @property
    def active(self) -> list[Track]:
        return [t for t in self.tracks if t.is_active]

    @property
    def inactive(self) -> list[Track]:
        return [t for t in self.tracks if not t.is_active]


def _select_by_capacity(detections: Sequence[Detection], capacity: int) -> list[Detection]:
    """Keep the ``capacity`` most confident detections, in their original order."""
    if len(detections) <= capacity:
        return list(detections)
    order = sorted(range(len(detections)), key=lambda i: -detections[i].confidence)
    keep = sorted(order[:capacity])
    return [detections[i] for i in keep]


def _spawn(detections: Iterable[Detection], next_id: int, frame_index: int, noise: NoiseConfig):
    tracks = []
    for det in detections:
        tracks.append(
            Track(next_id, det.box, kf_init(det.box, noise), TrackStatus.ACTIVE, 0, frame_index)
        )
        next_id += 1
    return tracks, next_id


def _filter_confident(detections: Sequence[Detection], config: TrackerConfig) -> list[Detection]:
    return [d for d in detections if d.confidence >= config.min_confidence and d.box.is_valid()]


def init_first_frame(detections: Sequence[Detection], config: TrackerConfig = TrackerConfig(), frame_index: int = 1) -> TrackerState:
    """Turn the first frame's confident detections into tracks with IDs 1, 2, ..."""
    chosen = _select_by_capacity(_filter_confident(detections, config), config.detection_capacity)
    tracks, next_id = _spawn(chosen, 1, frame_index, config.noise)
    return TrackerState(tuple(tracks), next_id, frame_index, born=len(tracks))


def propagate(tracks: Sequence[Track], frame: Optional[FrameGeometry] = None) -> list[tuple[TrackCandidate, Optional[KalmanState]]]:
    """Predict one candidate per track.

    Returns ``(candidate, predicted_state)`` pairs in track order. A track
    whose prediction degenerates (or, with a frame given, falls entirely
    outside it) gets ``None`` as state and must be treated as background.
    """
    out = []
    for track in tracks:
        inactive = not track.is_active
        try:
            state, box = kf_predict(track.kalman)
        except DegeneratePredictionError:
            log.debug("track %d: degenerate prediction", track.track_id)
            out.append((TrackCandidate(track.track_id, track.box, None, inactive), None))
            continue
        patch = None
        if frame is not None:
            try:
                patch = patch_region(box, frame)
            except OutOfFrameError:
                out.append((TrackCandidate(track.track_id, box, None, inactive), None))
                continue
        out.append((TrackCandidate(track.track_id, box, patch, inactive), state))
    return out


def step(
    state: TrackerState,
    frame_index: int,
    detections: Sequence[Detection],
    refiner: Optional[Refiner] = None,
    config: TrackerConfig = TrackerConfig(),
) -> tuple[TrackerState, list[Track]]:
    """Advance the tracker by one frame.

    Returns the new state and the active tracks of ``frame_index``, sorted by
    track id.

    Raises
    ------
    SequencingError
        Unless ``frame_index`` is exactly one past the previous frame.
    """
    if state.frame_index is None:
        new_state = init_first_frame(detections, config, frame_index)
        return new_state, sorted(new_state.active, key=lambda t: t.track_id)
    if frame_index != state.frame_index + 1:
        raise SequencingError(f"expected frame {state.frame_index + 1}, got {frame_index}")
    if refiner is None:
        refiner = AssociationRefiner(config)

    detections = _filter_confident(detections, config)
    propagated = propagate(state.tracks, config.frame)
    viable = [i for i, (_, s) in enumerate(propagated) if s is not None]
    candidates = [propagated[i][0] for i in viable]
    result = refiner(frame_index, candidates, detections)
    if len(result.outcomes) != len(candidates):
        raise SequencingError(
            f"refiner returned {len(result.outcomes)} outcomes for {len(candidates)} candidates"
        )
    outcome_of = {i: result.outcomes[k] for k, i in enumerate(viable)}

    kept: list[Track] = []
    reborn = state.reborn
    for i, track in enumerate(state.tracks):
        predicted = propagated[i][1]
        refined = outcome_of.get(i)
        if refined is not None:
            if not track.is_active:
                reborn += 1
            kalman = kf_update(predicted, refined)
            kept.append(Track(track.track_id, refined, kalman, TrackStatus.ACTIVE, 0, frame_index))
            continue
        age = track.inactive_age + 1
        if age > config.rebirth_window:
            continue
        kalman = predicted if predicted is not None else track.kalman
        box = propagated[i][0].predicted_box
        kept.append(replace(track, box=box, kalman=kalman, status=TrackStatus.INACTIVE, inactive_age=age))

    fresh = _select_by_capacity(list(result.new_objects), config.detection_capacity)
    spawned, next_id = _spawn(fresh, state.next_id, frame_index, config.noise)
    kept.extend(spawned)
    new_state = TrackerState(tuple(kept), next_id, frame_index, state.born + len(spawned), reborn)
    return new_state, sorted(new_state.active, key=lambda t: t.track_id)


@dataclass
class RunSummary:
    frames: int = 0
    born: int = 0
    reborn: int = 0


def run_sequence(
    detections: Iterable[Detection],
    num_frames: int,
    config: TrackerConfig = TrackerConfig(),
    refiner: Optional[Refiner] = None,
) -> tuple[dict[int, list[Track]], RunSummary]:
    """Track frames ``1..num_frames``; frames without detections still advance."""
    by_frame: dict[int, list[Detection]] = {}
    for det in detections:
        by_frame.setdefault(det.frame, []).append(det)
    if refiner is None:
        refiner = AssociationRefiner(config)
    state = TrackerState()
    results: dict[int, list[Track]] = {}
    for frame in range(1, num_frames + 1):
        state, active = step(state, frame, by_frame.get(frame, []), refiner, config)
        results[frame] = active
    return results, RunSummary(num_frames, state.born, state.reborn)


class Tracker:
    """Stateful convenience wrapper around :func:`step`."""

    def __init__(self, config: TrackerConfig = TrackerConfig(), refiner: Optional[Refiner] = None):
        self.config = config
        self.refiner = refiner if refiner is not None else AssociationRefiner(config)
        self.state = TrackerState()

    def update(self, frame_index: int, detections: Sequence[Detection]) -> list[Track]:
        self.state, active = step(self.state, frame_index, detections, self.refiner, self.config)
        return active
