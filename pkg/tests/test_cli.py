import re
import subprocess
import sys

import pytest

from mottk import cli
from mottk.augment import AugmentConfig, JitterConfig
from mottk.tracker import TrackerConfig


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def sim_dir(tmp_path):
    seq = tmp_path / "SIM-01"
    assert run("simulate", "--seed", 4, "--out", seq, "--num-frames", 60) == 0
    return seq


def test_closed_loop(sim_dir, tmp_path, capsys):
    res = tmp_path / "res.txt"
    assert run("track", "--seq", sim_dir, "--out", res) == 0
    assert "SIM-01: frames=60 born=10 reborn=0" in capsys.readouterr().out
    assert run("eval", "--gt", sim_dir / "gt" / "gt.txt", "--res", res, "--out", tmp_path / "m.ini") == 0
    table = capsys.readouterr().out.splitlines()
    assert table[1].split()[:3] == ["SIM-01", "100.0", "100.0"]
    assert "mota = 1.000000" in (tmp_path / "m.ini").read_text()


def test_track_is_byte_deterministic(sim_dir, tmp_path):
    run("track", "--seq", sim_dir, "--out", tmp_path / "a.txt")
    run("track", "--seq", sim_dir, "--out", tmp_path / "b.txt")
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()


def test_track_parallel_over_sequence_directory(tmp_path):
    root = tmp_path / "seqs"
    for seed in (1, 2, 3):
        run("simulate", "--seed", seed, "--out", root / f"S{seed}", "--num-frames", 20, "--clutter-rate", 1)
    run("track", "--seq", root, "--out", tmp_path / "one", "--jobs", 1)
    run("track", "--seq", root, "--out", tmp_path / "many", "--jobs", 3)
    for seed in (1, 2, 3):
        name = f"S{seed}.txt"
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "many" / name).read_bytes()


def test_missing_detections_names_path(sim_dir, tmp_path, capsys):
    (sim_dir / "det" / "det.txt").unlink()
    assert run("track", "--seq", sim_dir, "--out", tmp_path / "r.txt") == 2
    assert str(sim_dir / "det" / "det.txt") in capsys.readouterr().err


def test_eval_micro_case(tmp_path, capsys):
    gt = tmp_path / "gt.txt"
    res = tmp_path / "res.txt"
    gt.write_text("".join(f"{f},{i},{0 if i == 1 else 100},0,10,10,1,1,1\n" for f in range(1, 6) for i in (1, 2)))
    lines = [f"{f},7,0,0,10,10,1,-1,-1,-1\n" for f in range(1, 6)]
    lines += [f"{f},8,100,0,10,10,1,-1,-1,-1\n" for f in range(1, 4)]
    lines.append("2,9,500,500,10,10,1,-1,-1,-1\n")
    res.write_text("".join(lines))
    assert run("eval", "--gt", gt, "--res", res) == 0
    assert capsys.readouterr().out.splitlines()[1].split()[1] == "70.0"
    res.write_text("")
    assert run("eval", "--gt", gt, "--res", res) == 0
    row = capsys.readouterr().out.splitlines()[1].split()
    assert row[1] == "0.0" and row[6] == "10"


def test_eval_parse_error_exit_code(tmp_path, capsys):
    gt = tmp_path / "gt.txt"
    gt.write_text("1,1,0,0,10,10,1,1,1\n")
    res = tmp_path / "res.txt"
    res.write_text("1,7,0,0,10,10,1,1,1.0\n")
    assert run("eval", "--gt", gt, "--res", res) == 2
    assert "line 1" in capsys.readouterr().err


def test_augment_is_reproducible(sim_dir, tmp_path):
    run("augment", "--data", sim_dir, "--seed", 9, "--count", 40, "--out", tmp_path / "a.jsonl")
    run("augment", "--data", sim_dir, "--seed", 9, "--count", 40, "--out", tmp_path / "b.jsonl")
    a = (tmp_path / "a.jsonl").read_bytes()
    assert a == (tmp_path / "b.jsonl").read_bytes()
    assert len(a.splitlines()) == 40


def test_overlay_writes_one_svg_per_result_frame(sim_dir, tmp_path):
    res = tmp_path / "res.txt"
    res.write_text("1,1,0,0,10,10,1,-1,-1,-1\n2,1,1,0,10,10,1,-1,-1,-1\n3,2,5,5,10,10,1,-1,-1,-1\n")
    assert run("overlay", "--seq", sim_dir, "--res", res, "--out", tmp_path / "svg") == 0
    files = sorted(p.name for p in (tmp_path / "svg").iterdir())
    assert files == ["000001.svg", "000002.svg", "000003.svg"]
    text = (tmp_path / "svg" / "000001.svg").read_text()
    assert text.startswith("<svg") and cli.track_color(1) in text
    assert cli.track_color(1) == cli.track_color(1) != cli.track_color(2)


def test_seed_required_for_stochastic_commands(tmp_path, capsys):
    assert run("simulate", "--out", tmp_path / "x") == 1
    assert "--seed" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("track", "--bogus")
    assert exc.value.code == 1
    assert run("track", "--seq", tmp_path, "--out", tmp_path / "r", "--min-conf", 2) == 1
    assert run("track", "--seq", tmp_path, "--out", tmp_path / "r", "--jobs", 0) == 1


def test_config_file_precedence(sim_dir, tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[simulate]\nnum-frames = 12\nnum_objects = 2\nseed = 3\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path / "A") == 0
    assert "12 frames, 2 objects" in capsys.readouterr().out
    assert run("simulate", "--config", cfg, "--out", tmp_path / "B", "--num-frames", 5) == 0
    assert "5 frames, 2 objects" in capsys.readouterr().out
    cfg.write_text("[simulate]\nspeed = 3\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path / "C", "--seed", 1) == 2
    cfg.write_text("[tracking]\nrebirth = 3\n")
    assert run("track", "--config", cfg, "--seq", sim_dir, "--out", tmp_path / "r") == 2


def test_help_lists_module_defaults():
    text = subprocess.run(
        [sys.executable, "-m", "mottk", "track", "--help"], capture_output=True, text=True, check=True
    ).stdout
    flat = re.sub(r"\s+", " ", text)
    d = TrackerConfig()
    for flag, value in [("--min-conf", d.min_confidence), ("--rebirth", d.rebirth_window),
                        ("--iou-thresh", d.match_iou_threshold), ("--capacity", d.detection_capacity)]:
        assert re.search(re.escape(flag) + r" \S+ .*?\(default: " + re.escape(str(value)) + r"\)", flat)
    text = subprocess.run(
        [sys.executable, "-m", "mottk", "augment", "--help"], capture_output=True, text=True, check=True
    ).stdout
    flat = re.sub(r"\s+", " ", text)
    assert f"(default: {AugmentConfig().drop_prob})" in flat
    assert f"(default: {JitterConfig().max_center_shift})" in flat
