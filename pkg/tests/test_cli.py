import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from lidarstereo.cli import main
from lidarstereo.dataio import read_pfm, write_pfm
from lidarstereo.grids import INVALID
from lidarstereo.guidance import read_points_csv

DATA = Path(__file__).parent / "data"
PAIR = ["--left", str(DATA / "left.png"), "--right", str(DATA / "right.png")]


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    out = capsys.readouterr() if capsys else None
    return code, out


class TestMatch:
    def test_golden_unguided(self, tmp_path):
        code, _ = run(["match", *PAIR, "--method", "sgm", "--dmax", 15, "--out", tmp_path / "d.pfm"])
        assert code == 0
        assert (tmp_path / "d.pfm").read_bytes() == (DATA / "golden_sgm.pfm").read_bytes()

    def test_calib_range_matches_explicit(self, tmp_path):
        run(["match", *PAIR, "--calib", DATA / "calib.txt", "--out", tmp_path / "d.pfm"])
        assert (tmp_path / "d.pfm").read_bytes() == (DATA / "golden_sgm.pfm").read_bytes()

    def test_riverbed_reports_auto_window(self, tmp_path, capsys):
        code, out = run(
            ["match", *PAIR, "--dmax", 15, "--fusion", "riverbed", "--window", "auto",
             "--sample-gt", DATA / "gt.pfm", "--sample", "5%", "--out", tmp_path / "d.pfm"],
            capsys,
        )
        assert code == 0
        assert "window=5" in out.err
        assert read_pfm(tmp_path / "d.pfm").shape == (40, 48)

    def test_guidance_file_and_falsecolor(self, tmp_path, capsys):
        run(["sample", "--gt", DATA / "gt.pfm", "--spec", "5%", "--guidance-out", tmp_path / "g.csv",
             "--holdout-out", tmp_path / "h.csv"])
        code, out = run(
            ["match", *PAIR, "--dmax", 15, "--method", "adcensus", "--fusion", "gauss",
             "--guidance", tmp_path / "g.csv", "--out", tmp_path / "d.pfm", "--falsecolor", tmp_path / "d.png"],
            capsys,
        )
        assert code == 0 and (tmp_path / "d.png").exists()

    def test_missing_guidance_is_usage_error(self, tmp_path, capsys):
        code, out = run(
            ["match", *PAIR, "--dmax", 15, "--fusion", "riverbed", "--guidance", tmp_path / "nope.csv",
             "--out", tmp_path / "d.pfm"],
            capsys,
        )
        assert code == 1 and "guidance file not found" in out.err
        assert not (tmp_path / "d.pfm").exists()

    def test_riverbed_without_guidance_is_usage_error(self, tmp_path):
        code, _ = run(["match", *PAIR, "--dmax", 15, "--fusion", "riverbed", "--out", tmp_path / "d.pfm"])
        assert code == 1

    def test_fusion_none_ignores_guidance(self, tmp_path, capsys):
        (tmp_path / "g.csv").write_text("x,y,d\n10,10,3.0\n20,20,8.0\n")
        run(["match", *PAIR, "--dmax", 15, "--out", tmp_path / "a.pfm"])
        code, out = run(["match", *PAIR, "--dmax", 15, "--guidance", tmp_path / "g.csv", "--out", tmp_path / "b.pfm"], capsys)
        assert code == 0 and "ignoring" in out.err
        assert (tmp_path / "a.pfm").read_bytes() == (tmp_path / "b.pfm").read_bytes()

    def test_bad_arguments(self, tmp_path):
        assert run(["match", *PAIR, "--out", tmp_path / "d.pfm"])[0] == 1  # no range
        assert run(["match", *PAIR, "--dmax", 15, "--window", "4", "--out", tmp_path / "d.pfm"])[0] == 1
        assert run(["match", *PAIR, "--dmin", 9, "--dmax", 2, "--out", tmp_path / "d.pfm"])[0] == 1
        assert run(["frobnicate"])[0] == 1

    def test_corrupt_image_is_data_error(self, tmp_path, capsys):
        (tmp_path / "bad.png").write_bytes(b"not a png")
        code, out = run(["match", "--left", tmp_path / "bad.png", "--right", DATA / "right.png", "--dmax", 3,
                         "--out", tmp_path / "d.pfm"], capsys)
        assert code == 2 and "reading images" in out.err

    def test_guidance_outside_image_is_data_error(self, tmp_path, capsys):
        (tmp_path / "g.csv").write_text("x,y,d\n100,10,3.0\n")
        code, out = run(["match", *PAIR, "--dmax", 15, "--fusion", "gauss", "--guidance", tmp_path / "g.csv",
                         "--out", tmp_path / "d.pfm"], capsys)
        assert code == 2 and "loading guidance" in out.err


class TestSample:
    def test_counts_and_reproducibility(self, tmp_path):
        gt = read_pfm(DATA / "gt.pfm")
        valid = int(np.isfinite(gt).sum())
        for tag in ("a", "b"):
            code, _ = run(["sample", "--gt", DATA / "gt.pfm", "--spec", "5%", "--seed", 7,
                           "--guidance-out", tmp_path / f"g{tag}.csv", "--holdout-out", tmp_path / f"h{tag}.csv"])
            assert code == 0
        g = read_points_csv(tmp_path / "ga.csv")
        h = read_points_csv(tmp_path / "ha.csv")
        assert len(g) == round(0.05 * valid) and len(g) + len(h) == valid
        assert (tmp_path / "ga.csv").read_bytes() == (tmp_path / "gb.csv").read_bytes()

    def test_ratio_spec(self, tmp_path):
        code, _ = run(["sample", "--gt", DATA / "gt.pfm", "--spec", "1:3x3", "--pattern", "grid",
                       "--guidance-out", tmp_path / "g.csv", "--holdout-out", tmp_path / "h.csv"])
        assert code == 0
        g = read_points_csv(tmp_path / "g.csv")
        assert np.all(g.x % 3 == 1) and np.all(g.y % 3 == 1)

    def test_bad_spec(self, tmp_path):
        assert run(["sample", "--gt", DATA / "gt.pfm", "--spec", "lots"])[0] == 1


class TestEval:
    def test_perfect_map(self, tmp_path, capsys):
        run(["sample", "--gt", DATA / "gt.pfm", "--spec", "5%", "--guidance-out", tmp_path / "g.csv",
             "--holdout-out", tmp_path / "h.csv"])
        code, out = run(["eval", "--disp", DATA / "gt.pfm", "--holdout", tmp_path / "h.csv"], capsys)
        assert code == 0
        report = json.loads(out.out.strip().splitlines()[-1])
        assert report["avg_error"] == 0 and report["outliers_gt_1px"] == 0 and report["skipped"] == 0

    def test_empty_holdout(self, tmp_path, capsys):
        (tmp_path / "h.csv").write_text("x,y,d\n")
        code, out = run(["eval", "--disp", DATA / "gt.pfm", "--holdout", tmp_path / "h.csv"], capsys)
        assert code == 2

    def test_all_invalid_map(self, tmp_path):
        write_pfm(np.full((40, 48), INVALID), tmp_path / "d.pfm")
        (tmp_path / "h.csv").write_text("x,y,d\n1,1,2.0\n")
        assert run(["eval", "--disp", tmp_path / "d.pfm", "--holdout", tmp_path / "h.csv"])[0] == 2


def test_render(tmp_path):
    assert run(["render", "--disp", DATA / "gt.pfm", "--out", tmp_path / "gt.png"])[0] == 0
    assert (tmp_path / "gt.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestSweep:
    ARGS = ["sweep", *PAIR, "--gt", DATA / "gt.pfm", "--dmax", 15, "--densities", "1:3x3", "--windows", "3,5,7"]

    def test_rows(self, tmp_path):
        code, _ = run([*self.ARGS, "--out", tmp_path / "s.csv"])
        assert code == 0
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "density,window,avg_error,out1,out2,out3,auto"
        rows = [line.split(",") for line in lines[1:]]
        assert [r[1] for r in rows] == ["3", "5", "7"]
        assert [r[6] for r in rows] == ["0", "1", "0"]  # 1:3x3 -> auto window 5
        for r in rows:
            assert 0 <= float(r[2]) < 5
            assert float(r[3]) >= float(r[4]) >= float(r[5])

    def test_deterministic_and_parallel(self, tmp_path):
        run([*self.ARGS, "--out", tmp_path / "a.csv"])
        run([*self.ARGS, "--out", tmp_path / "b.csv"])
        run([*self.ARGS, "--jobs", 2, "--out", tmp_path / "c.csv"])
        a = (tmp_path / "a.csv").read_bytes()
        assert a == (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()

    def test_empty_ladder(self, tmp_path):
        args = list(self.ARGS)
        args[args.index("--windows") + 1] = ","
        assert run([*args, "--out", tmp_path / "s.csv"])[0] == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "lidarstereo", "render", "--disp", str(DATA / "gt.pfm"), "--out", str(tmp_path / "x.png")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "lidarstereo", "eval"], capture_output=True, text=True)
    assert proc.returncode == 1
