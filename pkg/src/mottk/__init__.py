"""Multi-object tracking engine and MOTChallenge evaluation toolkit."""
from mottk._kernels import BACKEND
from mottk.geometry import BoundingBox, FrameGeometry, giou, iou, patch_region

__version__ = "0.1.0"

__all__ = ["BACKEND", "BoundingBox", "FrameGeometry", "giou", "iou", "patch_region"]
