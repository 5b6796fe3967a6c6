import numpy as np
import pytest

from irstd import cli, io
from irstd.tensor import read_nlt1, write_nlt1

FAST = ["--set", "solver.max_outer=20", "--set", "solver.width=16", "--set", "solver.ranks=3,3,3,2",
        "--set", "lrtfr.iters=30", "--set", "lrtfr.width=16", "--set", "patch=16"]


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    root = tmp_path_factory.mktemp("scene")
    spec = root / "scene.txt"
    spec.write_text("n1 = 32\nn2 = 32\nn3 = 6\nseed = 4\nnoise = 0.01\ntarget = 10,10,1,0.5,0.7,2\n")
    assert cli.main(["synth", "--spec", str(spec), "--out", str(root / "out")]) == 0
    return root / "out"


def test_synth_writes_frames_and_gt(scene):
    frames = io.load_sequence(str(scene / "frames"))
    gt = io.load_masks(str(scene / "gt"))
    assert frames.shape == gt.shape == (32, 32, 6)
    assert gt[10, 10, 0] and gt[15, 12, 5]
    assert read_nlt1(str(scene / "frames.nlt")).shape == (32, 32, 6)


def test_detect_and_eval(scene, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("similar = 2\ngamma = 0.05\n")
    out = tmp_path / "det"
    code = cli.main(["--threads", "1", "detect", "--input", str(scene / "frames"), "--config", str(cfg),
                     "--gt", str(scene / "gt"), "--out", str(out), "--dump-state", str(tmp_path / "st")] + FAST)
    assert code == 0
    assert "Pd" in capsys.readouterr().out
    assert (out / "targets.nlt").exists() and (out / "report.csv").exists()
    assert "similar = 2" in (out / "config.txt").read_text()
    assert (tmp_path / "st" / "re_history.csv").read_text().startswith("t,re,rho,inner_loss")
    assert cli.main(["eval", "--pred", str(out / "masks"), "--gt", str(scene / "gt"),
                     "--out", str(tmp_path / "r.csv")]) == 0
    assert cli.main(["eval", "--pred", str(out / "targets.nlt"), "--gt", str(scene / "gt"),
                     "--out", str(tmp_path / "r2.csv")]) == 0
    assert (tmp_path / "r.csv").read_text() == (tmp_path / "r2.csv").read_text()

    resumed = tmp_path / "resumed"
    assert cli.main(["detect", "--input", str(scene / "frames"), "--config", str(cfg), "--resume", str(out),
                     "--out", str(resumed)] + FAST) == 0
    assert (resumed / "targets.nlt").read_bytes() == (out / "targets.nlt").read_bytes()


def test_flow_subcommand(scene, tmp_path):
    assert cli.main(["flow", "--input", str(scene / "frames.nlt"), "--out", str(tmp_path / "f")]) == 0
    fused = read_nlt1(str(tmp_path / "f" / "fused.nlt"))
    assert fused.shape == (32, 32, 6) and fused.min() >= 0
    assert io.load_sequence(str(tmp_path / "f")).max() == 1.0


def test_usage_errors_exit_1(scene, tmp_path, capsys):
    assert cli.main([]) == 1
    assert cli.main(["detect"]) == 1
    assert cli.main(["bogus"]) == 1
    assert cli.main(["detect", "--input", str(scene / "frames"), "--set", "gamma=7"]) == 1
    assert cli.main(["detect", "--input", str(scene / "frames"), "--set", "nope=1"]) == 1
    assert cli.main(["--threads", "-2", "flow", "--input", "x", "--out", "y"]) == 1
    bad = tmp_path / "bad.txt"
    bad.write_text("target = 1,60,0,5\n")
    assert cli.main(["synth", "--spec", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "error" in capsys.readouterr().err


def test_io_errors_exit_2(scene, tmp_path):
    assert cli.main(["detect", "--input", str(tmp_path / "missing")]) == 2
    (tmp_path / "empty").mkdir()
    assert cli.main(["flow", "--input", str(tmp_path / "empty"), "--out", str(tmp_path / "f")]) == 2
    assert cli.main(["detect", "--input", str(scene / "frames"), "--config", str(tmp_path / "nope.cfg")]) == 2
    assert cli.main(["synth", "--spec", str(tmp_path / "nope.txt"), "--out", str(tmp_path / "o")]) == 2
    corrupt = tmp_path / "c.nlt"
    corrupt.write_bytes(b"XXXX")
    assert cli.main(["eval", "--pred", str(corrupt), "--gt", str(scene / "gt"), "--out", "r.csv"]) == 2


def test_numeric_failure_exit_3(tmp_path):
    path = tmp_path / "nan.nlt"
    write_nlt1(str(path), np.full((32, 32, 4), np.nan))
    assert cli.main(["detect", "--input", str(path), "--set", "gamma=0", "--out", str(tmp_path / "o")] + FAST) == 3
