"""Small builders shared by the test modules."""
from mottk.geometry import BoundingBox
from mottk.mot_io import AnnotatedTrackEntry


def random_box(rng, scale=100.0, min_size=0.5):
    left, top = rng.uniform(-scale, scale, 2)
    w, h = rng.uniform(min_size, scale, 2)
    return BoundingBox(float(left), float(top), float(w), float(h))


def gt_entry(frame, tid, box, cls=1, flag=1.0):
    return AnnotatedTrackEntry(frame, tid, BoundingBox(*box), flag, (float(cls), 1.0))


def res_entry(frame, tid, box):
    return AnnotatedTrackEntry(frame, tid, BoundingBox(*box), 1.0, (-1.0, -1.0, -1.0))
