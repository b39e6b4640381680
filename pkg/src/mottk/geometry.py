"""Bounding boxes, overlap measures and patch clamping.

Boxes are stored as ``(left, top, width, height)`` in (sub-)pixel units, the
same layout MOTChallenge files use. Center-size form is only a conversion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from mottk import _kernels
from mottk.errors import InvalidBoxError, OutOfFrameError


@dataclass(frozen=True)
class BoundingBox:
    left: float
    top: float
    width: float
    height: float

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return self.left + self.width / 2.0, self.top + self.height / 2.0

    def is_valid(self) -> bool:
        """True when all fields are finite and the area is positive."""
        return (
            all(math.isfinite(v) for v in self.as_tuple())
            and self.width > 0
            and self.height > 0
            # a width far below the spacing of floats at ``left`` collapses
            and self.right > self.left
            and self.bottom > self.top
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.left, self.top, self.width, self.height)

    def to_cxcywh(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        return (cx, cy, self.width, self.height)

    @classmethod
    def from_cxcywh(cls, cx, cy, w, h) -> "BoundingBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    def to_xyah(self) -> np.ndarray:
        """Center x, center y, aspect ratio (w/h), height."""
        cx, cy = self.center
        return np.array([cx, cy, self.width / self.height, self.height])

    @classmethod
    def from_xyah(cls, xyah) -> "BoundingBox":
        cx, cy, a, h = (float(v) for v in xyah[:4])
        return cls.from_cxcywh(cx, cy, a * h, h)

    def translated(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.left + dx, self.top + dy, self.width, self.height)


@dataclass(frozen=True)
class FrameGeometry:
    frame_width: int
    frame_height: int

    def __post_init__(self):
        if self.frame_width <= 0 or self.frame_height <= 0:
            raise ValueError(
                f"frame dimensions must be positive, got "
                f"{self.frame_width}x{self.frame_height}"
            )

    def as_box(self) -> BoundingBox:
        return BoundingBox(0.0, 0.0, float(self.frame_width), float(self.frame_height))


def _check(box: BoundingBox) -> None:
    if not box.is_valid():
        raise InvalidBoxError(f"box must have finite coordinates and positive area: {box}")


def _intersection(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.right, b.right) - max(a.left, b.left)
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def _edge_area(box: BoundingBox) -> float:
    # measured from the edges so that a box intersected with itself gives
    # exactly its own area
    return (box.right - box.left) * (box.bottom - box.top)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two positive-area boxes."""
    _check(a)
    _check(b)
    inter = _intersection(a, b)
    return inter / (_edge_area(a) + _edge_area(b) - inter)


def giou(a: BoundingBox, b: BoundingBox) -> float:
    """Generalized IoU: ``iou - (|C| - |A u B|) / |C|`` with C the enclosing box."""
    _check(a)
    _check(b)
    inter = _intersection(a, b)
    union = _edge_area(a) + _edge_area(b) - inter
    cw = max(a.right, b.right) - min(a.left, b.left)
    ch = max(a.bottom, b.bottom) - min(a.top, b.top)
    enclosing = cw * ch
    return inter / union - (enclosing - union) / enclosing


def patch_region(candidate: BoundingBox, frame: FrameGeometry) -> BoundingBox:
    """Clamp ``candidate`` to the frame rectangle.

    Raises
    ------
    OutOfFrameError
        If the candidate and the frame do not overlap with positive area.
    """
    left = max(candidate.left, 0.0)
    top = max(candidate.top, 0.0)
    right = min(candidate.right, float(frame.frame_width))
    bottom = min(candidate.bottom, float(frame.frame_height))
    if not (right > left and bottom > top):
        raise OutOfFrameError(f"{candidate} lies outside the {frame.frame_width}x{frame.frame_height} frame")
    if (left, top, right, bottom) == (candidate.left, candidate.top, candidate.right, candidate.bottom):
        return candidate
    return BoundingBox(left, top, right - left, bottom - top)


def boxes_to_array(boxes: Iterable[BoundingBox]) -> np.ndarray:
    """Stack boxes into an ``(n, 4)`` float64 ltwh array."""
    arr = np.array([b.as_tuple() for b in boxes], dtype=np.float64)
    return arr.reshape(-1, 4)


def _as_ltwh(boxes) -> np.ndarray:
    if isinstance(boxes, np.ndarray):
        arr = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    else:
        arr = boxes_to_array(boxes)
    if arr.size and not (
        np.all(np.isfinite(arr))
        and np.all(arr[:, 2:] > 0)
        and np.all(arr[:, :2] + arr[:, 2:] > arr[:, :2])
    ):
        raise InvalidBoxError("all boxes must have finite coordinates and positive area")
    return arr


def iou_matrix(a: Sequence[BoundingBox] | np.ndarray, b: Sequence[BoundingBox] | np.ndarray) -> np.ndarray:
    """Pairwise IoU between two box collections, shape ``(len(a), len(b))``."""
    return _kernels.iou_matrix(_as_ltwh(a), _as_ltwh(b))


def giou_matrix(a: Sequence[BoundingBox] | np.ndarray, b: Sequence[BoundingBox] | np.ndarray) -> np.ndarray:
    """Pairwise generalized IoU, shape ``(len(a), len(b))``."""
    return _kernels.giou_matrix(_as_ltwh(a), _as_ltwh(b))
