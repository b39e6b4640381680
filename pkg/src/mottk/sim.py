"""Synthetic constant-velocity scenes and a detection noise model.

Ground truth is generated on a 0.01 px grid so it survives a round trip
through the 2-decimal MOTChallenge writer unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from mottk.errors import ConfigError
from mottk.geometry import BoundingBox, FrameGeometry
from mottk.mot_io import (
    AnnotatedTrackEntry,
    Detection,
    SequenceInfo,
    atomic_write_text,
    format_seqinfo,
    write_detections,
    write_ground_truth,
)


def _grid(x: float) -> float:
    return round(float(x), 2)


@dataclass(frozen=True)
class ObjectSpec:
    """An object with box ``box`` at frame ``entry`` moving ``velocity`` px/frame."""

    box: BoundingBox
    velocity: tuple[float, float] = (0.0, 0.0)
    entry: int = 1
    exit: Optional[int] = None


@dataclass(frozen=True)
class Occlusion:
    """Object ``object_id`` is hidden for ``duration`` frames from ``start``."""

    object_id: int
    start: int
    duration: int

    def __post_init__(self):
        if self.duration < 0:
            raise ConfigError("occlusion duration must be >= 0")

    def covers(self, frame: int) -> bool:
        return self.start <= frame < self.start + self.duration


@dataclass(frozen=True)
class ScenarioConfig:
    frame: FrameGeometry = FrameGeometry(1920, 1080)
    num_objects: int = 10
    num_frames: int = 200
    speed_range: tuple[float, float] = (-3.0, 3.0)
    width_range: tuple[float, float] = (30.0, 80.0)
    height_range: tuple[float, float] = (80.0, 200.0)
    # explicit objects replace the random ones (IDs follow list order)
    objects: Optional[tuple[ObjectSpec, ...]] = None
    occlusions: tuple[Occlusion, ...] = ()
    seed: int = 0


@dataclass(frozen=True)
class NoiseModel:
    center_std: float = 0.0
    size_std: float = 0.0
    drop_prob: float = 0.0
    clutter_rate: float = 0.0
    # confidences are uniform on these ranges
    true_conf_range: tuple[float, float] = (0.6, 1.0)
    clutter_conf_range: tuple[float, float] = (0.0, 0.5)

    def __post_init__(self):
        if self.center_std < 0 or self.size_std < 0 or self.clutter_rate < 0:
            raise ConfigError("noise standard deviations and clutter rate must be >= 0")
        if not 0 <= self.drop_prob <= 1:
            raise ConfigError("drop_prob must lie in [0, 1]")
        for lo, hi in (self.true_conf_range, self.clutter_conf_range):
            if not 0 <= lo <= hi <= 1:
                raise ConfigError("confidence ranges must satisfy 0 <= lo <= hi <= 1")


@dataclass
class Scenario:
    config: ScenarioConfig
    objects: tuple[ObjectSpec, ...]
    # frame -> {object id: box}, visible objects only; every frame is present
    frames: dict[int, dict[int, BoundingBox]] = field(default_factory=dict)

    def gt_entries(self) -> list[AnnotatedTrackEntry]:
        return [
            AnnotatedTrackEntry(f, oid, box, 1.0, (1.0, 1.0))
            for f in sorted(self.frames)
            for oid, box in sorted(self.frames[f].items())
        ]

    def sequence_info(self, name: str = "SIM") -> SequenceInfo:
        return SequenceInfo(name, self.config.num_frames, 30.0, self.config.frame.frame_width, self.config.frame.frame_height)


def _random_objects(config: ScenarioConfig, rng: np.random.Generator) -> tuple[ObjectSpec, ...]:
    W, H = config.frame.frame_width, config.frame.frame_height
    span = config.num_frames - 1
    objects = []
    for _ in range(config.num_objects):
        for _attempt in range(100):
            w = _grid(rng.uniform(*config.width_range))
            h = _grid(rng.uniform(*config.height_range))
            vx = _grid(rng.uniform(*config.speed_range))
            vy = _grid(rng.uniform(*config.speed_range))
            # start range that keeps the whole trajectory inside the frame
            x_lo, x_hi = max(0.0, -vx * span), min(W - w, W - w - vx * span)
            y_lo, y_hi = max(0.0, -vy * span), min(H - h, H - h - vy * span)
            if x_lo <= x_hi and y_lo <= y_hi:
                break
        else:
            raise ConfigError("cannot fit an object trajectory inside the frame; lower speed_range")
        x = _grid(rng.uniform(x_lo, x_hi))
        y = _grid(rng.uniform(y_lo, y_hi))
        objects.append(ObjectSpec(BoundingBox(x, y, w, h), (vx, vy), 1, config.num_frames))
    return tuple(objects)


def _box_at(spec: ObjectSpec, frame: int) -> BoundingBox:
    dt = frame - spec.entry
    b = spec.box
    return BoundingBox(
        _grid(b.left + spec.velocity[0] * dt),
        _grid(b.top + spec.velocity[1] * dt),
        _grid(b.width),
        _grid(b.height),
    )


def _inside(box: BoundingBox, frame: FrameGeometry) -> bool:
    return box.right > 0 and box.bottom > 0 and box.left < frame.frame_width and box.top < frame.frame_height


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Visible ground-truth boxes for every frame of the scenario.

    Objects move at constant velocity, exist in ``[entry, exit]``, are hidden
    while occluded and disappear while their box lies outside the frame.

    Raises
    ------
    ConfigError
        If an explicit object is not inside the frame at entry, or never is.
    """
    rng = np.random.default_rng(config.seed)
    if config.objects is None:
        objects = _random_objects(config, rng)
    else:
        objects = tuple(config.objects)
    ids = range(1, len(objects) + 1)
    for oid, spec in zip(ids, objects):
        if not spec.box.is_valid():
            raise ConfigError(f"object {oid}: box must have positive area")
        last = spec.exit if spec.exit is not None else config.num_frames
        if not (1 <= spec.entry <= config.num_frames) or last < spec.entry:
            raise ConfigError(f"object {oid}: entry/exit outside the sequence")
        if not _inside(_box_at(spec, spec.entry), config.frame):
            raise ConfigError(f"object {oid} is not inside the frame at entry")
    for occ in config.occlusions:
        if not 1 <= occ.object_id <= len(objects):
            raise ConfigError(f"occlusion refers to unknown object {occ.object_id}")

    frames: dict[int, dict[int, BoundingBox]] = {}
    for f in range(1, config.num_frames + 1):
        visible = {}
        for oid, spec in zip(ids, objects):
            last = spec.exit if spec.exit is not None else config.num_frames
            if not spec.entry <= f <= last:
                continue
            if any(o.object_id == oid and o.covers(f) for o in config.occlusions):
                continue
            box = _box_at(spec, f)
            if _inside(box, config.frame):
                visible[oid] = box
        frames[f] = visible
    return Scenario(config, objects, frames)


def corrupt_detections(scenario: Scenario, noise: NoiseModel, seed: int = 0) -> dict[int, list[Detection]]:
    """Turn visible ground truth into noisy detections, one list per frame.

    Each visible box is dropped with ``drop_prob`` or jittered by Gaussian
    center and size noise. A Poisson number of clutter boxes, sized like the
    scene's objects, is added uniformly inside the frame.
    """
    rng = np.random.default_rng(seed)
    W, H = scenario.config.frame.frame_width, scenario.config.frame.frame_height
    sizes = [(o.box.width, o.box.height) for o in scenario.objects] or [(50.0, 100.0)]
    out: dict[int, list[Detection]] = {}
    for f in sorted(scenario.frames):
        dets = []
        for oid, box in sorted(scenario.frames[f].items()):
            drop = rng.random() < noise.drop_prob
            dcx, dcy, dw, dh = rng.normal(0.0, 1.0, 4)
            conf = rng.uniform(*noise.true_conf_range)
            if drop:
                continue
            cx, cy = box.center
            w = max(1.0, box.width + noise.size_std * dw)
            h = max(1.0, box.height + noise.size_std * dh)
            cx += noise.center_std * dcx
            cy += noise.center_std * dcy
            jittered = BoundingBox(_grid(cx - w / 2), _grid(cy - h / 2), _grid(w), _grid(h))
            dets.append(Detection(f, jittered, round(float(conf), 4)))
        for _ in range(rng.poisson(noise.clutter_rate)):
            w, h = sizes[rng.integers(len(sizes))]
            w, h = min(w, W), min(h, H)
            x = rng.uniform(0.0, W - w)
            y = rng.uniform(0.0, H - h)
            conf = rng.uniform(*noise.clutter_conf_range)
            dets.append(Detection(f, BoundingBox(_grid(x), _grid(y), _grid(w), _grid(h)), round(float(conf), 4)))
        out[f] = dets
    return out


def write_scenario(directory, scenario: Scenario, detections: dict[int, list[Detection]], name: Optional[str] = None) -> Path:
    """Write ``seqinfo.ini``, ``gt/gt.txt`` and ``det/det.txt`` under ``directory``."""
    directory = Path(directory)
    name = name or directory.name or "SIM"
    atomic_write_text(directory / "seqinfo.ini", format_seqinfo(scenario.sequence_info(name)))
    atomic_write_text(directory / "gt" / "gt.txt", write_ground_truth(scenario.gt_entries()))
    flat = [d for f in sorted(detections) for d in detections[f]]
    atomic_write_text(directory / "det" / "det.txt", write_detections(flat))
    return directory
