"""``mottk`` command line: track, eval, augment, simulate, overlay.

Every option can also be given in a config file (``--config``) holding one
section per subcommand with ``key = value`` lines; keys are option names
with ``-`` or ``_``. Flags override the file. Unknown keys are rejected.

Exit status: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation.
"""
from __future__ import annotations

import argparse
import colorsys
import configparser
import io
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from mottk import augment as aug
from mottk.errors import (
    ConfigError,
    ConsistencyError,
    DomainError,
    MotError,
    NumericError,
    ParseError,
    SamplingExhausted,
    SequencingError,
    UndefinedMetricError,
)
from mottk.geometry import BoundingBox, FrameGeometry
from mottk.metrics import evaluate, format_keyvalue, format_table, merge_reports
from mottk.mot_io import (
    MotKind,
    atomic_write_text,
    group_by_frame,
    is_sequence_dir,
    load_sequence,
    read_mot_file,
    read_seqinfo,
    write_results,
)
from mottk.motion import NoiseConfig
from mottk.sim import NoiseModel, Occlusion, ScenarioConfig, corrupt_detections, generate_scenario, write_scenario
from mottk.tracker import TrackerConfig, run_sequence

log = logging.getLogger("mottk")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Option:
    name: str
    type: Callable[[str], Any]
    default: Any
    help: str
    required: bool = False

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


_TRACKER = TrackerConfig()
_AUG = aug.AugmentConfig()
_JIT = aug.JitterConfig()
_SCN = ScenarioConfig()
_NOISE = NoiseModel()

COMMON = [
    Option("jobs", int, 1, "parallel worker processes"),
    Option("seed", int, None, "random seed (required by augment and simulate)"),
]

OPTIONS: dict[str, list[Option]] = {
    "track": [
        Option("seq", Path, None, "sequence directory, or a directory of sequences", True),
        Option("out", Path, None, "results file (a directory when --seq holds several sequences)", True),
        Option("min-conf", float, _TRACKER.min_confidence, "ignore detections below this confidence"),
        Option("rebirth", int, _TRACKER.rebirth_window, "frames an inactive track may wait for re-birth"),
        Option("iou-thresh", float, _TRACKER.match_iou_threshold, "association IoU gate"),
        Option("capacity", int, _TRACKER.detection_capacity, "maximum detections considered per frame"),
    ],
    "eval": [
        Option("gt", Path, None, "ground-truth file", True),
        Option("res", Path, None, "results file", True),
        Option("iou-thresh", float, 0.5, "IoU needed for a match"),
        Option("out", Path, None, "also write a key = value report here"),
    ],
    "augment": [
        Option("data", Path, None, "sequence directory with gt/gt.txt, or a directory of them", True),
        Option("out", Path, None, "output sample file (JSON lines)", True),
        Option("count", int, 1000, "number of samples"),
        Option("drop-prob", float, _AUG.drop_prob, "probability of withholding a persisting track"),
        Option("max-fp", int, _AUG.max_false_positives, "maximum false positives per sample"),
        Option("max-gap", int, _AUG.max_gap, "maximum frame gap of video pairs"),
        Option("image-pair-prob", float, _AUG.image_pair_prob, "probability of a still-image pair"),
        Option("max-shift", float, _JIT.max_center_shift, "jitter center shift, fraction of box size"),
        Option("max-scale", float, _JIT.max_scale_change, "jitter scale change, fraction of box size"),
        Option("max-attempts", int, _JIT.max_attempts, "rejection-sampling attempts"),
    ],
    "simulate": [
        Option("out", Path, None, "output sequence directory", True),
        Option("name", str, None, "sequence name (default: output directory name)"),
        Option("num-objects", int, _SCN.num_objects, "number of objects"),
        Option("num-frames", int, _SCN.num_frames, "number of frames"),
        Option("width", int, _SCN.frame.frame_width, "frame width in pixels"),
        Option("height", int, _SCN.frame.frame_height, "frame height in pixels"),
        Option("center-std", float, _NOISE.center_std, "detection center noise (px)"),
        Option("size-std", float, _NOISE.size_std, "detection size noise (px)"),
        Option("drop-prob", float, _NOISE.drop_prob, "probability of a missed detection"),
        Option("clutter-rate", float, _NOISE.clutter_rate, "mean clutter detections per frame"),
        Option("occlusions", str, "", "comma-separated id:start:duration triples"),
    ],
    "overlay": [
        Option("seq", Path, None, "sequence directory (frame size and ground truth)", True),
        Option("res", Path, None, "results file", True),
        Option("out", Path, None, "output directory for per-frame SVG files", True),
    ],
}

SEEDED = {"augment", "simulate"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mottk", description="Multi-object tracking toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for command, options in OPTIONS.items():
        p = sub.add_parser(command, help=_HELP[command], description=_HELP[command])
        p.add_argument("--config", type=Path, default=None, help="config file with a [%s] section" % command)
        for opt in COMMON + options:
            suffix = " (required)" if opt.required else f" (default: {opt.default})"
            if opt.name == "seed" and command in SEEDED:
                suffix = " (required)"
            p.add_argument(f"--{opt.name}", dest=opt.dest, type=opt.type, default=None, help=opt.help + suffix)
    return parser


_HELP = {
    "track": "run the association tracker over MOTChallenge sequences",
    "eval": "compute CLEAR and identity metrics",
    "augment": "generate training samples from annotated sequences",
    "simulate": "write a synthetic sequence with ground truth and detections",
    "overlay": "draw ground truth and results as one SVG per frame",
}


def _read_config(path: Path, command: str) -> dict[str, str]:
    parser = configparser.ConfigParser(default_section="\x00", interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    unknown_sections = set(parser.sections()) - set(OPTIONS)
    if unknown_sections:
        raise ConfigError(f"{path}: unknown section(s) {sorted(unknown_sections)}")
    if not parser.has_section(command):
        return {}
    return {k.replace("-", "_"): v for k, v in parser.items(command)}


def resolve(command: str, args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults, config file and flags (in increasing precedence)."""
    options = COMMON + OPTIONS[command]
    from_file = _read_config(args.config, command) if args.config is not None else {}
    known = {o.dest: o for o in options}
    unknown = set(from_file) - set(known)
    if unknown:
        raise ConfigError(f"{args.config}: unknown key(s) in [{command}]: {sorted(unknown)}")
    values = {}
    for dest, opt in known.items():
        flag = getattr(args, dest)
        if flag is not None:
            values[dest] = flag
        elif dest in from_file:
            try:
                values[dest] = opt.type(from_file[dest].strip())
            except ValueError as exc:
                raise ConfigError(f"{args.config}: bad value for {dest}: {exc}") from exc
        else:
            values[dest] = opt.default
        if opt.required and values[dest] is None:
            raise UsageError(f"--{opt.name} is required")
    if command in SEEDED and values["seed"] is None:
        raise UsageError("--seed is required")
    if values["jobs"] < 1:
        raise UsageError("--jobs must be >= 1")
    return values


# ---------------------------------------------------------------- track

def _track_one(seq_dir: Path, out: Path, config: TrackerConfig) -> tuple[str, int, int, int]:
    bundle = load_sequence(seq_dir)
    frame = FrameGeometry(bundle.info.width, bundle.info.height)
    cfg = TrackerConfig(
        config.rebirth_window, config.detection_capacity, config.match_iou_threshold,
        config.min_confidence, config.noise, frame,
    )
    results, summary = run_sequence(bundle.detections, bundle.info.frame_count, cfg)
    atomic_write_text(out, write_results(results))
    return bundle.info.name, summary.frames, summary.born, summary.reborn


def _sequence_dirs(path: Path) -> list[Path]:
    if is_sequence_dir(path):
        return [path]
    if not path.is_dir():
        raise FileNotFoundError(f"sequence directory not found: {path}")
    found = sorted(p for p in path.iterdir() if is_sequence_dir(p))
    if not found:
        raise FileNotFoundError(f"no sequence (seqinfo.ini) found under: {path}")
    return found


def cmd_track(v: dict) -> int:
    try:
        config = TrackerConfig(
            rebirth_window=v["rebirth"],
            detection_capacity=v["capacity"],
            match_iou_threshold=v["iou_thresh"],
            min_confidence=v["min_conf"],
            noise=NoiseConfig(),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    seq: Path = v["seq"]
    dirs = _sequence_dirs(seq)
    if len(dirs) == 1 and is_sequence_dir(seq):
        jobs = [(dirs[0], v["out"])]
    else:
        jobs = [(d, v["out"] / f"{d.name}.txt") for d in dirs]
    if v["jobs"] > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=v["jobs"]) as pool:
            futures = [pool.submit(_track_one, d, o, config) for d, o in jobs]
            summaries = [f.result() for f in futures]
    else:
        summaries = [_track_one(d, o, config) for d, o in jobs]
    for name, frames, born, reborn in summaries:
        print(f"{name}: frames={frames} born={born} reborn={reborn}")
    return EXIT_OK


# ----------------------------------------------------------------- eval

def _sequence_name(gt_path: Path) -> str:
    if gt_path.parent.name == "gt":
        return gt_path.parent.parent.name or gt_path.stem
    return gt_path.stem


def cmd_eval(v: dict) -> int:
    if not 0 < v["iou_thresh"] < 1:
        raise UsageError("--iou-thresh must lie in (0, 1)")
    gt = read_mot_file(v["gt"], MotKind.GROUND_TRUTH)
    res = read_mot_file(v["res"], MotKind.RESULTS)
    report = evaluate(gt, res, v["iou_thresh"], _sequence_name(v["gt"]))
    report = merge_reports([report])
    sys.stdout.write(format_table(report))
    if v["out"] is not None:
        atomic_write_text(v["out"], format_keyvalue(report))
    return EXIT_OK


# -------------------------------------------------------------- augment

def load_annotated(path: Path) -> list[aug.AnnotatedSequence]:
    """Evaluated ground truth of each sequence under ``path``, by frame and ID."""
    sequences = []
    for d in _sequence_dirs(path):
        info = read_seqinfo(d / "seqinfo.ini")
        gt_path = d / "gt" / "gt.txt"
        if not gt_path.is_file():
            raise FileNotFoundError(f"ground truth not found: {gt_path}")
        boxes: dict[int, dict[int, BoundingBox]] = {}
        for e in read_mot_file(gt_path, MotKind.GROUND_TRUTH):
            if e.is_evaluated and e.box.is_valid():
                boxes.setdefault(e.frame, {})[e.track_id] = e.box
        sequences.append(aug.AnnotatedSequence(info.name, FrameGeometry(info.width, info.height), info.frame_count, boxes))
    return sequences


def cmd_augment(v: dict) -> int:
    try:
        jitter = aug.JitterConfig(v["max_shift"], v["max_scale"], aug.MIN_IOU_KEEP, v["max_attempts"])
        config = aug.AugmentConfig(
            jitter=jitter,
            drop_prob=v["drop_prob"],
            max_false_positives=v["max_fp"],
            max_gap=v["max_gap"],
            image_pair_prob=v["image_pair_prob"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if v["count"] < 0:
        raise UsageError("--count must be >= 0")
    sequences = load_annotated(v["data"])
    out = io.StringIO()
    for sample in aug.generate_samples(sequences, v["count"], v["seed"], config):
        out.write(sample.to_json() + "\n")
    atomic_write_text(v["out"], out.getvalue())
    print(f"wrote {v['count']} samples to {v['out']}")
    return EXIT_OK


# ------------------------------------------------------------- simulate

def _parse_occlusions(text: str) -> tuple[Occlusion, ...]:
    occlusions = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        try:
            oid, start, duration = (int(x) for x in item.split(":"))
        except ValueError as exc:
            raise ConfigError(f"occlusion must be id:start:duration, got {item!r}") from exc
        occlusions.append(Occlusion(oid, start, duration))
    return tuple(occlusions)


def cmd_simulate(v: dict) -> int:
    try:
        frame = FrameGeometry(v["width"], v["height"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if v["num_objects"] < 0 or v["num_frames"] < 1:
        raise UsageError("--num-objects must be >= 0 and --num-frames >= 1")
    noise = NoiseModel(v["center_std"], v["size_std"], v["drop_prob"], v["clutter_rate"])
    config = ScenarioConfig(
        frame=frame,
        num_objects=v["num_objects"],
        num_frames=v["num_frames"],
        occlusions=_parse_occlusions(v["occlusions"]),
        seed=v["seed"],
    )
    scenario = generate_scenario(config)
    detections = corrupt_detections(scenario, noise, v["seed"])
    write_scenario(v["out"], scenario, detections, v["name"])
    print(f"wrote {config.num_frames} frames, {len(scenario.objects)} objects to {v['out']}")
    return EXIT_OK


# -------------------------------------------------------------- overlay

def track_color(track_id: int) -> str:
    """Stable color for a track ID (hash-derived hue)."""
    h = (int(track_id) * 2654435761) & 0xFFFFFFFF
    r, g, b = colorsys.hls_to_rgb((h % 360) / 360.0, 0.5, 0.75)
    return "#%02x%02x%02x" % (round(r * 255), round(g * 255), round(b * 255))


def _rect(box: BoundingBox, style: str) -> str:
    x, y = round(box.left), round(box.top)
    w, h = round(box.width), round(box.height)
    return f'<rect x="{x}" y="{y}" width="{w}" height="{h}" {style}/>'


def render_svg(width: int, height: int, gt: Sequence, results: Sequence) -> str:
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white" stroke="black"/>',
    ]
    for e in sorted(gt, key=lambda e: e.track_id):
        lines.append(_rect(e.box, 'fill="none" stroke="gray" stroke-dasharray="4 2"'))
    for e in sorted(results, key=lambda e: e.track_id):
        color = track_color(e.track_id)
        lines.append(_rect(e.box, f'fill="none" stroke="{color}" stroke-width="2"'))
        lines.append(
            f'<text x="{round(e.box.left)}" y="{round(e.box.top) - 2}" fill="{color}" font-size="12">{e.track_id}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def cmd_overlay(v: dict) -> int:
    seq: Path = v["seq"]
    info = read_seqinfo(seq / "seqinfo.ini") if (seq / "seqinfo.ini").is_file() else None
    if info is None:
        raise FileNotFoundError(f"required file not found: {seq / 'seqinfo.ini'}")
    results = group_by_frame(read_mot_file(v["res"], MotKind.RESULTS))
    gt_path = seq / "gt" / "gt.txt"
    gt = group_by_frame(read_mot_file(gt_path, MotKind.GROUND_TRUTH)) if gt_path.is_file() else {}
    out: Path = v["out"]
    for frame in sorted(results):
        svg = render_svg(info.width, info.height, gt.get(frame, []), results[frame])
        atomic_write_text(out / f"{frame:06d}.svg", svg)
    print(f"wrote {len(results)} SVG files to {out}")
    return EXIT_OK


COMMANDS = {
    "track": cmd_track,
    "eval": cmd_eval,
    "augment": cmd_augment,
    "simulate": cmd_simulate,
    "overlay": cmd_overlay,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        values = resolve(args.command, args)
        return COMMANDS[args.command](values)
    except UsageError as exc:
        print(f"mottk {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ConfigError, UndefinedMetricError, DomainError, SamplingExhausted, OSError) as exc:
        print(f"mottk {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConsistencyError, SequencingError, NumericError, AssertionError) as exc:
        print(f"mottk {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except MotError as exc:
        print(f"mottk {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
