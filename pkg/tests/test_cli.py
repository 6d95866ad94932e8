"""Command line interface: runs, artifacts, error paths, reproduce cases."""
import json
import math
import subprocess
import sys

import pytest

from wkstab.cli import main

FLAT_FUTAKI = {
    "polyhedron": {"preset": "half_line", "a": -1},
    "weights": {
        "v": {"constructor": "exponential", "decay": [1]},
        "w": {"constructor": "soliton"},
    },
    "task": "futaki",
    "params": {"family": "f_x0", "grid": [0, 1, 2]},
    "tolerances": {"rel_tol": 1e-8, "abs_tol": 1e-10},
}


def write_problem(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj, indent=2))
    return str(path)


def run_cli(*args):
    return main(list(args))


def test_futaki_run_artifacts(tmp_path):
    p = write_problem(tmp_path, "flat.json", FLAT_FUTAKI)
    out = tmp_path / "run1"
    assert run_cli("run", "--input", p, "--out", str(out)) == 0
    rows = (out / "futaki.csv").read_text().splitlines()
    assert rows[0] == "param,futaki,error"
    for line in rows[1:]:
        x0_s, val_s, _ = line.split(",")
        x0, val = float(x0_s), float(val_s)
        assert abs(val - 2 * (x0 + 1) * math.exp(-x0)) < 1e-9
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["kind"] == "Computed"
    assert all(abs(a["value"]) < 1e-9 for a in verdict["affine"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "computed"
    assert "futaki.csv" in manifest["artifacts"]


def test_bit_identical_reruns(tmp_path):
    p = write_problem(tmp_path, "flat.json", FLAT_FUTAKI)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run_cli("run", "--input", p, "--out", str(out1)) == 0
    assert run_cli("run", "--input", p, "--out", str(out2)) == 0
    for name in ("verdict.json", "futaki.csv", "manifest.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_thread_invariant_artifacts(tmp_path):
    p = write_problem(tmp_path, "flat.json", FLAT_FUTAKI)
    out1 = tmp_path / "t1"
    out2 = tmp_path / "t2"
    assert run_cli("run", "--input", p, "--out", str(out1), "--threads", "1") == 0
    assert run_cli("run", "--input", p, "--out", str(out2), "--threads", "4") == 0
    for name in ("verdict.json", "futaki.csv", "manifest.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_malformed_polyhedron_exits_2(tmp_path, capsys):
    bad = dict(FLAT_FUTAKI)
    bad["polyhedron"] = {
        "dim": 2,
        "halfspaces": [{"normal": [0, 0], "offset": "1"}],
    }
    p = write_problem(tmp_path, "bad.json", bad)
    assert run_cli("run", "--input", p, "--out", str(tmp_path / "o")) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == 2


def test_unknown_task_and_missing_file_exit_2(tmp_path, capsys):
    bad = dict(FLAT_FUTAKI)
    bad["task"] = "frobnicate"
    p = write_problem(tmp_path, "bad_task.json", bad)
    assert run_cli("run", "--input", p, "--out", str(tmp_path / "x")) == 2
    missing = str(tmp_path / "nope.json")
    assert run_cli("run", "--input", missing, "--out", str(tmp_path / "y")) == 2
    capsys.readouterr()


def test_profile_run(tmp_path):
    prob = {
        "polyhedron": {"preset": "half_line"},
        "weights": {
            "v": {"constructor": "exponential", "decay": [1]},
            "w": {"constructor": "soliton"},
        },
        "task": "profile",
        "params": {"x0_grid": [0, 1, 2]},
    }
    p = write_problem(tmp_path, "prof.json", prob)
    out = tmp_path / "out"
    assert run_cli("run", "--input", p, "--out", str(out)) == 0
    v = json.loads((out / "verdict.json").read_text())
    assert v["kind"] == "Exists" and v["certified"] is True
    assert v["crease_identity"]["max_residual"] < 1e-10
    assert (out / "profile.csv").exists()
    assert (out / "crease_identity.csv").exists()


def test_profile_failure_is_still_exit_0(tmp_path):
    prob = {
        "polyhedron": {"preset": "half_line"},
        "weights": {
            "v": {"constructor": "polynomial", "coeffs": [[[0], "2"], [[1], "1"]]},
            "w": {"constructor": "constant", "value": "2"},
        },
        "task": "profile",
        "params": {},
    }
    p = write_problem(tmp_path, "prof_fail.json", prob)
    out = tmp_path / "out"
    assert run_cli("run", "--input", p, "--out", str(out)) == 0
    v = json.loads((out / "verdict.json").read_text())
    assert v["kind"] == "FailsPositivityAt"
    assert abs(v["x_star"] - 1.0) < 1e-9


def test_profile_numerical_failures_exit_3(tmp_path, capsys):
    prob = {
        "polyhedron": {"preset": "half_line"},
        "weights": {
            "v": {"constructor": "polynomial", "coeffs": [[[0], "2"], [[1], "1"]]},
            "w": {"constructor": "constant", "value": "2"},
        },
        "task": "profile",
        "params": {"decaying": True},
    }
    p = write_problem(tmp_path, "div.json", prob)
    out = tmp_path / "odiv"
    assert run_cli("run", "--input", p, "--out", str(out)) == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "DivergentIntegral"
    assert (out / "error.json").exists()

    prob_aff = {
        "polyhedron": {"preset": "half_line"},
        "weights": {
            "v": {"constructor": "exponential", "decay": [1]},
            "w": {
                "constructor": "polynomial",
                "coeffs": [[[0], "4"], [[1], "-4"]],
                "decay": [1],
            },
        },
        "task": "profile",
        "params": {"decaying": True},
    }
    p2 = write_problem(tmp_path, "aff.json", prob_aff)
    assert run_cli("run", "--input", p2, "--out", str(tmp_path / "oaff")) == 3
    err2 = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err2["error"] == "AffineFutakiNonzero"


def test_validate_task(tmp_path):
    prob = dict(FLAT_FUTAKI)
    prob["task"] = "validate"
    p = write_problem(tmp_path, "val.json", prob)
    out = tmp_path / "out"
    assert run_cli("run", "--input", p, "--out", str(out)) == 0
    v = json.loads((out / "verdict.json").read_text())
    assert v["kind"] == "Valid" and v["delzant"] and v["round_trip"]


def test_li_task(tmp_path):
    prob = {
        "polyhedron": {"preset": "half_line"},
        "weights": {
            "v": {"constructor": "exponential", "decay": [1]},
            "w": {"constructor": "soliton"},
        },
        "task": "li",
        "params": {"d": 1, "k": 1, "tau": 3, "kappa": 1},
    }
    p = write_problem(tmp_path, "li.json", prob)
    out = tmp_path / "out"
    assert run_cli("run", "--input", p, "--out", str(out)) == 0
    v = json.loads((out / "verdict.json").read_text())
    assert v["F_at_1"] == "11/2"
    assert -2.2 < v["decay"]["slope"] < -1.8
    assert (out / "decay.csv").exists()


def test_line_bundle_constructor(tmp_path):
    prob = {
        "polyhedron": {"preset": "half_line"},
        "weights": {
            "constructor": "line_bundle",
            "v": {"constructor": "exponential", "decay": [1]},
            "w": {"constructor": "soliton"},
            "data": [[1, 2, 1, "3"]],
        },
        "task": "validate",
    }
    p = write_problem(tmp_path, "lb.json", prob)
    assert run_cli("run", "--input", p, "--out", str(tmp_path / "out")) == 0


def test_scan_task(tmp_path):
    prob = {
        "polyhedron": {"preset": "half_line"},
        "weights": {
            "v": {"constructor": "exponential", "decay": [1]},
            "w": {"constructor": "soliton"},
        },
        "task": "scan",
        "params": {"budget": 12},
    }
    p = write_problem(tmp_path, "scan.json", prob)
    out = tmp_path / "out"
    assert run_cli("run", "--input", p, "--out", str(out)) == 0
    v = json.loads((out / "verdict.json").read_text())
    assert v["kind"] == "NoDestabilizerFound"
    assert (out / "scan.csv").exists()


def test_reproduce_flat_1d(tmp_path):
    out = tmp_path / "rep"
    assert run_cli("reproduce", "--case", "flat_1d", "--out", str(out)) == 0
    rep = json.loads((out / "reproduce.json").read_text())
    assert rep["ok"]
    assert all(c["ok"] for c in rep["checks"])


def test_reproduce_li_profile(tmp_path):
    assert run_cli("reproduce", "--case", "li_profile_k1") == 0


def test_module_entry_point(tmp_path):
    p = write_problem(tmp_path, "flat.json", FLAT_FUTAKI)
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "wkstab.cli",
            "run",
            "--input",
            p,
            "--out",
            str(tmp_path / "out"),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "out" / "verdict.json").exists()
