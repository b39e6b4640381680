"""MOTChallenge text formats and sequence directory layout.

Line layout::

    frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z

Detection and result files always carry 10 columns. Ground-truth files of
MOT16/17 carry 9: ``frame,id,box,flag,class,visibility``; the 10-column
MOT15 layout is accepted for ground truth as well.
"""
from __future__ import annotations

import configparser
import enum
import io
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, TextIO, Union

from mottk.errors import ConsistencyError, ParseError
from mottk.geometry import BoundingBox

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")

PEDESTRIAN = 1
# person on vehicle, static person, distractor, reflection
DISTRACTOR_CLASSES = frozenset({2, 7, 8, 12})


class MotKind(enum.Enum):
    GROUND_TRUTH = "gt"
    DETECTIONS = "det"
    RESULTS = "res"


@dataclass(frozen=True)
class Detection:
    frame: int
    box: BoundingBox
    confidence: float


@dataclass(frozen=True)
class AnnotatedTrackEntry:
    """One parsed line. ``extra`` holds the columns after ``conf`` verbatim."""

    frame: int
    track_id: int
    box: BoundingBox
    confidence: float
    extra: tuple[float, ...] = (-1.0, -1.0, -1.0)

    @property
    def class_id(self) -> int:
        """Object class for 9-column ground truth, -1 when the file has none."""
        if len(self.extra) == 2:
            return int(self.extra[0])
        return -1

    @property
    def visibility(self) -> float:
        if len(self.extra) == 2:
            return self.extra[1]
        return -1.0

    @property
    def is_evaluated(self) -> bool:
        """Ground-truth entry that counts towards pedestrian metrics."""
        return self.confidence != 0 and self.class_id in (PEDESTRIAN, -1)

    @property
    def is_distractor(self) -> bool:
        return self.class_id in DISTRACTOR_CLASSES

    def to_detection(self) -> Detection:
        return Detection(self.frame, self.box, self.confidence)


@dataclass(frozen=True)
class SequenceInfo:
    name: str
    frame_count: int
    frame_rate: float
    width: int
    height: int

    def __post_init__(self):
        if self.frame_count <= 0 or self.frame_rate <= 0 or self.width <= 0 or self.height <= 0:
            raise ValueError(f"sequence info fields must be positive: {self}")


@dataclass(frozen=True)
class SequenceBundle:
    info: SequenceInfo
    detections: list[Detection]
    ground_truth: Optional[list[AnnotatedTrackEntry]]


def _field(text: str, lineno: int, source, what: str) -> float:
    text = text.strip()
    if not _NUMBER.match(text):
        raise ParseError(f"{what} is not a number: {text!r}", lineno, source)
    return float(text)


def _integer(text: str, lineno: int, source, what: str) -> int:
    value = _field(text, lineno, source, what)
    if value != int(value):
        raise ParseError(f"{what} must be an integer, got {text.strip()!r}", lineno, source)
    return int(value)


def parse_mot_file(stream: Union[TextIO, str], kind: MotKind, source: Optional[str] = None) -> list[AnnotatedTrackEntry]:
    """Parse a MOTChallenge text stream into entries, in file order.

    Parameters
    ----------
    stream : file-like or str
        Text stream, or the file contents as a string.
    kind : MotKind
        Selects the column rules. Detections must carry ``id == -1``.
    source : str, optional
        Name used in error messages.

    Raises
    ------
    ParseError
        Wrong column count, non-numeric field, ``frame < 1``, a detection with
        an id other than -1 or a detection without positive area.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    allowed = (9, 10) if kind is MotKind.GROUND_TRUTH else (10,)
    entries = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        cols = line.split(",")
        if len(cols) not in allowed:
            want = " or ".join(str(n) for n in allowed)
            raise ParseError(f"expected {want} columns, found {len(cols)}", lineno, source)
        frame = _integer(cols[0], lineno, source, "frame")
        if frame < 1:
            raise ParseError(f"frame must be >= 1, got {frame}", lineno, source)
        track_id = _integer(cols[1], lineno, source, "id")
        left, top, width, height = (_field(c, lineno, source, "box coordinate") for c in cols[2:6])
        conf = _field(cols[6], lineno, source, "confidence")
        extra = tuple(_field(c, lineno, source, "trailing field") for c in cols[7:])
        box = BoundingBox(left, top, width, height)
        if kind is MotKind.DETECTIONS:
            if track_id != -1:
                raise ParseError(f"detections must carry id -1, got {track_id}", lineno, source)
            if not box.is_valid():
                raise ParseError(f"detection box has non-positive area: {box.as_tuple()}", lineno, source)
        entries.append(AnnotatedTrackEntry(frame, track_id, box, conf, extra))
    return entries


def read_mot_file(path, kind: MotKind) -> list[AnnotatedTrackEntry]:
    with open(path, encoding="utf-8") as fh:
        return parse_mot_file(fh, kind, source=str(path))


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _fmt_num(value: float) -> str:
    # integral values without a trailing ".0"; reals as their shortest repr
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def write_results(tracks_per_frame: Mapping[int, Iterable]) -> str:
    """Serialize per-frame tracks to the result layout.

    ``tracks_per_frame`` maps a frame number to tracks; each track is either
    an object with ``track_id`` and ``box`` attributes or a ``(track_id, box)``
    pair. Lines are ordered by frame, then track id.

    Raises
    ------
    ConsistencyError
        If a track id appears twice in one frame.
    """
    rows = []
    for frame, tracks in tracks_per_frame.items():
        seen = set()
        for track in tracks:
            if isinstance(track, tuple):
                track_id, box = track
            else:
                track_id, box = track.track_id, track.box
            if track_id in seen:
                raise ConsistencyError(f"duplicate track id {track_id} in frame {frame}")
            seen.add(track_id)
            rows.append((int(frame), int(track_id), box))
    rows.sort(key=lambda r: (r[0], r[1]))
    out = io.StringIO()
    for frame, track_id, box in rows:
        out.write(
            f"{frame},{track_id},{_fmt(box.left)},{_fmt(box.top)},"
            f"{_fmt(box.width)},{_fmt(box.height)},1,-1,-1,-1\n"
        )
    return out.getvalue()


def write_ground_truth(entries: Iterable[AnnotatedTrackEntry]) -> str:
    """Serialize ground truth in the 9-column MOT16/17 layout."""
    rows = sorted(entries, key=lambda e: (e.frame, e.track_id))
    out = io.StringIO()
    for e in rows:
        cls = e.class_id if e.class_id != -1 else PEDESTRIAN
        vis = e.visibility if e.visibility >= 0 else 1.0
        b = e.box
        out.write(
            f"{e.frame},{e.track_id},{_fmt(b.left)},{_fmt(b.top)},{_fmt(b.width)},"
            f"{_fmt(b.height)},{_fmt_num(e.confidence)},{cls},{_fmt_num(vis)}\n"
        )
    return out.getvalue()


def write_detections(detections: Iterable[Detection]) -> str:
    """Serialize detections in the 10-column layout, ordered by frame (stable)."""
    rows = sorted(detections, key=lambda d: d.frame)
    out = io.StringIO()
    for d in rows:
        b = d.box
        out.write(
            f"{d.frame},-1,{_fmt(b.left)},{_fmt(b.top)},{_fmt(b.width)},"
            f"{_fmt(b.height)},{_fmt_num(d.confidence)},-1,-1,-1\n"
        )
    return out.getvalue()


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to a temporary sibling file, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_seqinfo(path) -> SequenceInfo:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        try:
            parser.read_file(fh)
        except configparser.Error as exc:
            raise ParseError(str(exc), source=str(path)) from exc
    if "Sequence" not in parser:
        raise ParseError("missing [Sequence] section", source=str(path))
    sec = parser["Sequence"]
    try:
        return SequenceInfo(
            name=sec.get("name", Path(path).parent.name),
            frame_count=int(sec["seqLength"]),
            frame_rate=float(sec.get("frameRate", "30")),
            width=int(sec["imWidth"]),
            height=int(sec["imHeight"]),
        )
    except KeyError as exc:
        raise ParseError(f"missing key {exc.args[0]}", source=str(path)) from exc
    except ValueError as exc:
        raise ParseError(str(exc), source=str(path)) from exc


def format_seqinfo(info: SequenceInfo) -> str:
    rate = _fmt_num(info.frame_rate)
    return (
        "[Sequence]\n"
        f"name={info.name}\n"
        "imDir=img1\n"
        f"frameRate={rate}\n"
        f"seqLength={info.frame_count}\n"
        f"imWidth={info.width}\n"
        f"imHeight={info.height}\n"
        "imExt=.jpg\n"
    )


def load_sequence(directory) -> SequenceBundle:
    """Load ``seqinfo.ini``, ``det/det.txt`` and, if present, ``gt/gt.txt``.

    Raises
    ------
    FileNotFoundError
        When ``seqinfo.ini`` or ``det/det.txt`` is missing; the message names
        the path.
    """
    directory = Path(directory)
    seqinfo = directory / "seqinfo.ini"
    det = directory / "det" / "det.txt"
    for required in (seqinfo, det):
        if not required.is_file():
            raise FileNotFoundError(f"required file not found: {required}")
    info = read_seqinfo(seqinfo)
    detections = [e.to_detection() for e in read_mot_file(det, MotKind.DETECTIONS)]
    gt_path = directory / "gt" / "gt.txt"
    ground_truth = read_mot_file(gt_path, MotKind.GROUND_TRUTH) if gt_path.is_file() else None
    return SequenceBundle(info, detections, ground_truth)


def is_sequence_dir(directory) -> bool:
    return (Path(directory) / "seqinfo.ini").is_file()


def group_by_frame(items: Iterable) -> dict[int, list]:
    """Bucket anything with a ``frame`` attribute, preserving order."""
    grouped: dict[int, list] = {}
    for item in items:
        grouped.setdefault(item.frame, []).append(item)
    return grouped
