"""CLEAR MOT metrics and IDF1.

Conventions follow the MOTChallenge benchmark: a match needs IoU >= 0.5,
correspondences persist across frames while they stay above the threshold,
MT/ML use 80 % / 20 % coverage, and IDF1 uses the global ID-to-ID matching
that maximizes identity-consistent detections.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field, fields
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from mottk.assign import solve_assignment
from mottk.errors import UndefinedMetricError
from mottk.geometry import BoundingBox, iou_matrix
from mottk.mot_io import AnnotatedTrackEntry

MT_RATIO = 0.8
ML_RATIO = 0.2


@dataclass
class FrameCorrespondence:
    """CLEAR matching state after one frame.

    ``matches`` maps GT id to hypothesis id for this frame; ``last_hyp``
    remembers the most recent hypothesis of every GT id seen so far.
    """

    matches: dict[int, int] = field(default_factory=dict)
    last_hyp: dict[int, int] = field(default_factory=dict)
    unmatched_gt: tuple[int, ...] = ()
    unmatched_hyp: tuple[int, ...] = ()
    switches: tuple[int, ...] = ()

    @property
    def num_switches(self) -> int:
        return len(self.switches)


def clear_match(
    prev: FrameCorrespondence,
    gt: Mapping[int, BoundingBox],
    hyp: Mapping[int, BoundingBox],
    threshold: float = 0.5,
) -> FrameCorrespondence:
    """Match one frame, keeping previous pairs that still overlap enough."""
    gt_ids = sorted(gt)
    hyp_ids = sorted(hyp)
    overlap = iou_matrix([gt[g] for g in gt_ids], [hyp[h] for h in hyp_ids])
    gidx = {g: i for i, g in enumerate(gt_ids)}
    hidx = {h: j for j, h in enumerate(hyp_ids)}

    matches: dict[int, int] = {}
    for g, h in prev.matches.items():
        if g in gidx and h in hidx and overlap[gidx[g], hidx[h]] >= threshold:
            matches[g] = h

    free_g = [g for g in gt_ids if g not in matches]
    taken = set(matches.values())
    free_h = [h for h in hyp_ids if h not in taken]
    if free_g and free_h:
        sub = overlap[np.ix_([gidx[g] for g in free_g], [hidx[h] for h in free_h])]
        valid = sub >= threshold
        # gated pairs cost more than any full set of valid pairs
        cost = np.where(valid, 1.0 - sub, float(len(free_g) + len(free_h) + 1))
        for r, c in solve_assignment(cost).pairs:
            if valid[r, c]:
                matches[free_g[r]] = free_h[c]

    last_hyp = dict(prev.last_hyp)
    switches = []
    for g in sorted(matches):
        h = matches[g]
        if g in last_hyp and last_hyp[g] != h:
            switches.append(g)
        last_hyp[g] = h
    taken = set(matches.values())
    return FrameCorrespondence(
        matches=matches,
        last_hyp=last_hyp,
        unmatched_gt=tuple(g for g in gt_ids if g not in matches),
        unmatched_hyp=tuple(h for h in hyp_ids if h not in taken),
        switches=tuple(switches),
    )


@dataclass(frozen=True)
class ClearResult:
    fp: int
    fn: int
    idsw: int
    mt: int
    ml: int
    gt_total: int
    hyp_total: int
    matches: int
    num_gt_tracks: int

    @property
    def mota(self) -> float:
        if self.gt_total == 0:
            raise UndefinedMetricError("MOTA is undefined without ground truth")
        return 1.0 - (self.fp + self.fn + self.idsw) / self.gt_total


@dataclass(frozen=True)
class IdentityResult:
    idtp: int
    idfp: int
    idfn: int

    @property
    def idf1(self) -> float:
        denom = 2 * self.idtp + self.idfp + self.idfn
        if denom == 0:
            raise UndefinedMetricError("IDF1 is undefined without ground truth or hypotheses")
        return 2 * self.idtp / denom


FrameBoxes = dict[int, dict[int, BoundingBox]]


def _group(entries: Iterable[AnnotatedTrackEntry]) -> FrameBoxes:
    out: FrameBoxes = {}
    for e in entries:
        out.setdefault(e.frame, {})[e.track_id] = e.box
    return out


def prepare(
    gt_entries: Sequence[AnnotatedTrackEntry],
    result_entries: Sequence[AnnotatedTrackEntry],
    threshold: float = 0.5,
) -> tuple[FrameBoxes, FrameBoxes]:
    """Keep evaluated GT and drop hypotheses that cover distractors.

    Evaluated GT has flag != 0 and the pedestrian class (or no class column).
    In each frame, hypotheses matched at ``threshold`` to a distractor-class
    GT box (by min ``1 - IoU`` assignment over all GT) are removed.
    """
    all_gt: dict[int, list[AnnotatedTrackEntry]] = {}
    for e in gt_entries:
        all_gt.setdefault(e.frame, []).append(e)
    hyp = _group(result_entries)
    for frame, entries in all_gt.items():
        if frame not in hyp or not any(e.is_distractor for e in entries):
            continue
        hyp_ids = sorted(hyp[frame])
        overlap = iou_matrix([e.box for e in entries], [hyp[frame][h] for h in hyp_ids])
        valid = overlap >= threshold
        cost = np.where(valid, 1.0 - overlap, float(len(entries) + len(hyp_ids) + 1))
        for r, c in solve_assignment(cost).pairs:
            if valid[r, c] and entries[r].is_distractor:
                del hyp[frame][hyp_ids[c]]
    gt = _group(e for e in gt_entries if e.is_evaluated)
    return gt, hyp


def clear_from_frames(gt: FrameBoxes, hyp: FrameBoxes, threshold: float = 0.5) -> ClearResult:
    fp = fn = idsw = matched = 0
    gt_total = sum(len(v) for v in gt.values())
    hyp_total = sum(len(v) for v in hyp.values())
    present: dict[int, int] = {}
    covered: dict[int, int] = {}
    corr = FrameCorrespondence()
    for frame in sorted(set(gt) | set(hyp)):
        g = gt.get(frame, {})
        h = hyp.get(frame, {})
        corr = clear_match(corr, g, h, threshold)
        fp += len(corr.unmatched_hyp)
        fn += len(corr.unmatched_gt)
        idsw += corr.num_switches
        matched += len(corr.matches)
        for gid in g:
            present[gid] = present.get(gid, 0) + 1
        for gid in corr.matches:
            covered[gid] = covered.get(gid, 0) + 1
    mt = sum(1 for gid, n in present.items() if covered.get(gid, 0) >= MT_RATIO * n)
    ml = sum(1 for gid, n in present.items() if covered.get(gid, 0) <= ML_RATIO * n)
    return ClearResult(fp, fn, idsw, mt, ml, gt_total, hyp_total, matched, len(present))


def identity_from_frames(gt: FrameBoxes, hyp: FrameBoxes, threshold: float = 0.5) -> IdentityResult:
    gt_total = sum(len(v) for v in gt.values())
    hyp_total = sum(len(v) for v in hyp.values())
    # co-occurrence counts of (gt id, hyp id) pairs overlapping >= threshold
    pair_counts: dict[tuple[int, int], int] = {}
    for frame in sorted(set(gt) & set(hyp)):
        g_ids = sorted(gt[frame])
        h_ids = sorted(hyp[frame])
        overlap = iou_matrix([gt[frame][g] for g in g_ids], [hyp[frame][h] for h in h_ids])
        for r, c in zip(*np.nonzero(overlap >= threshold)):
            key = (g_ids[r], h_ids[c])
            pair_counts[key] = pair_counts.get(key, 0) + 1
    idtp = 0
    if pair_counts:
        rows = sorted({g for g, _ in pair_counts})
        cols = sorted({h for _, h in pair_counts})
        ri = {g: i for i, g in enumerate(rows)}
        ci = {h: j for j, h in enumerate(cols)}
        counts = np.zeros((len(rows), len(cols)))
        for (g, h), n in pair_counts.items():
            counts[ri[g], ci[h]] = n
        for r, c in solve_assignment(-counts).pairs:
            idtp += int(counts[r, c])
    return IdentityResult(idtp, hyp_total - idtp, gt_total - idtp)


def compute_clear(gt_entries, result_entries, threshold: float = 0.5) -> ClearResult:
    """CLEAR counts (FP, FN, IDsw, MT, ML) over a GT/result pair.

    Raises
    ------
    UndefinedMetricError
        If no evaluated ground truth remains.
    """
    gt, hyp = prepare(gt_entries, result_entries, threshold)
    result = clear_from_frames(gt, hyp, threshold)
    if result.gt_total == 0:
        raise UndefinedMetricError("no evaluated ground-truth boxes")
    return result


def compute_idf1(gt_entries, result_entries, threshold: float = 0.5) -> float:
    gt, hyp = prepare(gt_entries, result_entries, threshold)
    if not any(gt.values()):
        raise UndefinedMetricError("no evaluated ground-truth boxes")
    return identity_from_frames(gt, hyp, threshold).idf1


@dataclass(frozen=True)
class MetricReport:
    name: str
    mota: float
    idf1: float
    fp: int
    fn: int
    idsw: int
    mt: int
    ml: int
    gt_total: int
    hyp_total: int
    num_gt_tracks: int
    idtp: int
    idfp: int
    idfn: int
    per_sequence: tuple["MetricReport", ...] = ()

    def check(self) -> None:
        """Assert the report's internal identities."""
        expected = 1.0 - (self.fp + self.fn + self.idsw) / self.gt_total
        assert abs(self.mota - expected) <= 1e-9, (self.mota, expected)
        assert self.mt + self.ml <= self.num_gt_tracks
        assert 0.0 <= self.idf1 <= 1.0


COUNT_FIELDS = ("fp", "fn", "idsw", "mt", "ml", "gt_total", "hyp_total", "num_gt_tracks", "idtp", "idfp", "idfn")


def evaluate(gt_entries, result_entries, threshold: float = 0.5, name: str = "seq") -> MetricReport:
    """Full report (CLEAR + IDF1) for one sequence."""
    gt, hyp = prepare(gt_entries, result_entries, threshold)
    clear = clear_from_frames(gt, hyp, threshold)
    if clear.gt_total == 0:
        raise UndefinedMetricError(f"{name}: no evaluated ground-truth boxes")
    ident = identity_from_frames(gt, hyp, threshold)
    report = MetricReport(
        name=name,
        mota=clear.mota,
        idf1=ident.idf1,
        fp=clear.fp,
        fn=clear.fn,
        idsw=clear.idsw,
        mt=clear.mt,
        ml=clear.ml,
        gt_total=clear.gt_total,
        hyp_total=clear.hyp_total,
        num_gt_tracks=clear.num_gt_tracks,
        idtp=ident.idtp,
        idfp=ident.idfp,
        idfn=ident.idfn,
    )
    report.check()
    return report


def merge_reports(reports: Sequence[MetricReport], name: str = "OVERALL") -> MetricReport:
    """Sum counts over sequences and recompute the ratios from the sums."""
    if not reports:
        raise UndefinedMetricError("nothing to merge")
    sums = {f: sum(getattr(r, f) for r in reports) for f in COUNT_FIELDS}
    if sums["gt_total"] == 0:
        raise UndefinedMetricError("no ground truth in any sequence")
    mota = 1.0 - (sums["fp"] + sums["fn"] + sums["idsw"]) / sums["gt_total"]
    idf1 = IdentityResult(sums["idtp"], sums["idfp"], sums["idfn"]).idf1
    report = MetricReport(name=name, mota=mota, idf1=idf1, per_sequence=tuple(reports), **sums)
    report.check()
    return report


_TABLE_COLUMNS = (
    ("MOTA", lambda r: f"{100 * r.mota:.1f}"),
    ("IDF1", lambda r: f"{100 * r.idf1:.1f}"),
    ("MT", lambda r: str(r.mt)),
    ("ML", lambda r: str(r.ml)),
    ("FP", lambda r: str(r.fp)),
    ("FN", lambda r: str(r.fn)),
    ("IDsw", lambda r: str(r.idsw)),
    ("GT", lambda r: str(r.gt_total)),
)


def _rows(report: MetricReport) -> list[MetricReport]:
    return list(report.per_sequence) + [report] if report.per_sequence else [report]


def format_table(report: MetricReport) -> str:
    """Aligned plain-text table, one row per sequence plus the overall row."""
    rows = _rows(report)
    header = ["Sequence"] + [c for c, _ in _TABLE_COLUMNS]
    body = [[r.name] + [fmt(r) for _, fmt in _TABLE_COLUMNS] for r in rows]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = []
    for row in [header] + body:
        cells = [row[0].ljust(widths[0])] + [cell.rjust(w) for cell, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


REPORT_KEYS = ("mota", "idf1", "fp", "fn", "idsw", "mt", "ml", "gt_total", "hyp_total", "num_gt_tracks", "idtp", "idfp", "idfn")


def format_keyvalue(report: MetricReport) -> str:
    """``[section]`` per sequence with ``key = value`` lines; stable key order."""
    out = io.StringIO()
    for r in _rows(report):
        out.write(f"[{r.name}]\n")
        for key in REPORT_KEYS:
            value = getattr(r, key)
            text = f"{value:.6f}" if isinstance(value, float) else str(value)
            out.write(f"{key} = {text}\n")
        out.write("\n")
    return out.getvalue()
