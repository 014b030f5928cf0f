import json
import math
import os
import stat
import subprocess
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import pytest

from carpetlab import __version__
from carpetlab.cli import run
from carpetlab.io import atomic_write, dumps, to_jsonable, write_csv


def test_to_jsonable_handles_library_types():
    @dataclass
    class Row:
        a: float
        b: np.ndarray

    out = to_jsonable({1: Row(np.float64(1.5), np.arange(3)), "f": Fraction(1, 3), "x": (np.int64(2), math.inf, np.bool_(True))})
    assert out == {"1": {"a": 1.5, "b": [0, 1, 2]}, "f": "1/3", "x": [2, "inf", True]}
    assert json.loads(dumps(out)) == out


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    p = tmp_path / "sub" / "r.json"
    atomic_write(p, "one")
    atomic_write(p, "two")
    assert p.read_text() == "two"
    assert [q.name for q in p.parent.iterdir()] == ["r.json"]
    assert stat.S_IMODE(p.stat().st_mode) == 0o644


def test_csv_keeps_full_precision(tmp_path):
    p = write_csv(tmp_path / "t.csv", ("a", "b"), [(0.1 + 0.2, "x")])
    assert p.read_text().splitlines() == ["a,b", "0.30000000000000004,x"]


def _walk(out, *extra):
    return run(["walk", "--pattern", "a", "--k", "9", "--out", str(out), *extra])


def test_walk_passes_and_embeds_config(tmp_path, capsys):
    assert _walk(tmp_path, "--rho", "1/2", "--seed", "3") == 0
    assert "PASS walk" in capsys.readouterr().out
    rep = json.loads((tmp_path / "walk_rho1-2.json").read_text())
    assert rep["version"] == __version__
    assert rep["config"]["rho"] == "1/2" and rep["config"]["seed"] == 3
    assert "out" not in rep["config"]
    assert (tmp_path / "walk_rho1-2_corner.csv").exists()


def test_failed_check_exits_one(tmp_path, capsys):
    assert _walk(tmp_path, "--slack", "-1") == 1
    assert "FAIL walk" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [["bogus"], ["walk", "--rho", "0"], ["walk", "--rho", "abc"], ["resistance", "--level", "-1"], ["harnack", "--ms", ""], ["heatkernel", "--level", "5", "--block", "2"]],
)
def test_usage_errors_exit_two(argv, tmp_path):
    assert run(argv + ["--out", str(tmp_path)] if argv != ["bogus"] else argv) == 2


def test_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["walk", "--check", "ychain", "--pattern", "g", "--k", "1", "--transitions", "5000", "--seed", "11", "--out", str(d), "--format", "json"]) == 0
    assert (a / "walk_rho1.json").read_bytes() == (b / "walk_rho1.json").read_bytes()


def test_output_dir_from_environment(tmp_path):
    env = dict(os.environ, CARPETLAB_OUT=str(tmp_path / "env"))
    proc = subprocess.run(
        [sys.executable, "-m", "carpetlab.cli", "resistance", "--level", "1", "--method", "G", "--format", "json"],
        env=env, capture_output=True, text=True, cwd=tmp_path,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "env" / "resistance_rho1.json").exists()


def test_heatkernel_small_block(tmp_path):
    code = run(["heatkernel", "--block", "3", "--level", "3", "--lambda", "1.25", "--points", "5", "--out", str(tmp_path)])
    rep = json.loads((tmp_path / "heatkernel_rho1.json").read_text())
    assert code == (0 if all(c["passed"] for c in rep["checks"]) else 1)
    names = {c["name"] for c in rep["checks"]}
    assert "mass conservation" in names and "rescaling identity within 1%" in names
