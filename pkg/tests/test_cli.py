import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qcollide.cli import main, parse_offsets, parse_range


def run_cli(args):
    return main(args)


def read_lines(path):
    return Path(path).read_text().splitlines()


def test_parse_range():
    assert np.allclose(parse_range("0:10:41"), np.linspace(0, 10, 41))
    assert np.allclose(parse_range("2.5"), [2.5])
    with pytest.raises(Exception):
        parse_range("1:2")


def test_parse_offsets():
    assert parse_offsets("0,1;1,0") == [(0, 1), (1, 0)]


def test_usage_error_exit_code():
    result = subprocess.run(
        [sys.executable, "-m", "qcollide.cli", "simulate", "--L"],
        capture_output=True,
    )
    assert result.returncode == 2


def test_validate_command(tmp_path):
    assert run_cli(["validate", "--L", "2", "--output-dir", str(tmp_path)]) == 0
    lines = read_lines(tmp_path / "validate.csv")
    assert lines[0] == "# schema: qcollide.validate.v1"
    assert all(",pass," in line for line in lines[2:])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "validate"


def test_simulate_outputs_and_reproducibility(tmp_path):
    args = [
        "simulate", "--L", "2", "--T", "20", "--trajectories", "2",
        "--seed", "11", "--output-dir",
    ]
    assert run_cli(args + [str(tmp_path / "a")]) == 0
    assert run_cli(args + [str(tmp_path / "b")]) == 0
    for name in ("trajectory_0000.csv", "trajectory_0001.csv", "estimators.csv"):
        a = (tmp_path / "a" / name).read_text()
        b = (tmp_path / "b" / name).read_text()
        assert a == b, name
    first = read_lines(tmp_path / "a" / "trajectory_0000.csv")
    assert first[0] == "# schema: qcollide.trajectory.v1"
    assert first[1] == "t,site,outcome,occupation"


def test_simulate_worker_count_irrelevant(tmp_path):
    base = ["simulate", "--L", "2", "--T", "15", "--trajectories", "3", "--seed", "5"]
    assert run_cli(base + ["--workers", "1", "--output-dir", str(tmp_path / "w1")]) == 0
    assert run_cli(base + ["--workers", "3", "--output-dir", str(tmp_path / "w3")]) == 0
    for name in ("trajectory_0000.csv", "trajectory_0002.csv", "estimators.csv"):
        assert (tmp_path / "w1" / name).read_text() == (tmp_path / "w3" / name).read_text()


def test_ensemble_outputs(tmp_path):
    assert run_cli([
        "ensemble", "--L", "2", "--T", "10", "--offsets", "0,1",
        "--output-dir", str(tmp_path),
    ]) == 0
    act = read_lines(tmp_path / "activity.csv")
    assert act[0] == "# schema: qcollide.activity.v1"
    assert act[1] == "t,activity"
    assert len(act) == 12
    stat = read_lines(tmp_path / "stationary.csv")
    labels = {line.split(",")[0] for line in stat[2:]}
    assert {"activity", "c_0_1", "activity_pxp", "c_0_1_pxp"} <= labels


def test_phase_diagram_output(tmp_path):
    assert run_cli([
        "phase-diagram", "--L", "2", "--V-range", "1:5.875:2", "--s-range=-0.2:0.2:3",
        "--output-dir", str(tmp_path),
    ]) == 0
    lines = read_lines(tmp_path / "phase_diagram.csv")
    assert lines[0] == "# schema: qcollide.phase_diagram.v1"
    assert lines[1] == "V,s,activity,c_0_1,lambda,iterations,converged"
    assert len(lines) == 2 + 6
    s_zero = [l for l in lines[2:] if l.split(",")[1] == "0.0"]
    for line in s_zero:
        fields = line.split(",")
        assert fields[-1] == "true"
        assert abs(float(fields[4]) - 1.0) <= 1e-12


def test_lindblad_outputs(tmp_path):
    assert run_cli([
        "lindblad", "--L", "2", "--V", "6", "--t-max", "3", "--trajectories", "1",
        "--record-dt", "0.5", "--s-range=-0.1:0.1:3", "--output-dir", str(tmp_path),
    ]) == 0
    ev = read_lines(tmp_path / "events.csv")
    assert ev[0] == "# schema: qcollide.jump_events.v1"
    scan = read_lines(tmp_path / "scgf_scan.csv")
    assert scan[1] == "s,theta,activity"
    middle = scan[3].split(",")
    assert abs(float(middle[1])) <= 1e-9  # theta(0) = 0


def test_singlebody_outputs(tmp_path):
    assert run_cli([
        "singlebody", "--dt-range", "0.5:1.25:2", "--gamma-range", "1:3:2",
        "--delta-range", "0:1:2", "--s-range", "0:0:1", "--output-dir", str(tmp_path),
    ]) == 0
    m = read_lines(tmp_path / "singlebody_map.csv")
    assert m[0] == "# schema: qcollide.singlebody_map.v1"
    det = read_lines(tmp_path / "detuning_scan.csv")
    assert det[1] == "delta,s,activity,c_0_1,lambda,iterations,converged"


def test_config_file_with_flag_override(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"L": 2, "T": 9, "seed": 42}))
    out = tmp_path / "out"
    assert run_cli([
        "simulate", "--config", str(config), "--T", "5", "--trajectories", "1",
        "--output-dir", str(out),
    ]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["L"] == 2  # from file
    assert manifest["config"]["T"] == 5  # flag wins
    assert manifest["config"]["seed"] == 42


def test_manifest_contents(tmp_path):
    run_cli(["ensemble", "--L", "2", "--T", "3", "--output-dir", str(tmp_path)])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["version"]
    assert manifest["wall_time_s"] >= 0
    assert any(o.endswith("activity.csv") for o in manifest["outputs"])


def test_ensemble_single_site_skips_pxp(tmp_path):
    assert run_cli(["ensemble", "--L", "1", "--V", "0", "--T", "3",
                    "--offsets", "0,1", "--output-dir", str(tmp_path)]) == 0
    labels = {l.split(",")[0] for l in read_lines(tmp_path / "stationary.csv")[2:]}
    assert "activity" in labels and "activity_pxp" not in labels


def test_reset_free_postprocess_flag(tmp_path):
    assert run_cli([
        "simulate", "--L", "2", "--T", "6", "--trajectories", "1", "--reset-free",
        "--postprocess", "--output-dir", str(tmp_path),
    ]) == 0
    assert (tmp_path / "trajectory_0000.csv").exists()
    # postprocess without reset-free is a usage error
    assert run_cli([
        "simulate", "--L", "2", "--T", "3", "--trajectories", "1",
        "--postprocess", "--output-dir", str(tmp_path / "x"),
    ]) == 2


def test_strict_convergence_exit_code(tmp_path):
    code = run_cli([
        "phase-diagram", "--L", "2", "--V-range", "5.875", "--s-range", "0.2",
        "--max-iter", "1", "--strict", "--output-dir", str(tmp_path),
    ])
    assert code == 4
    lines = read_lines(tmp_path / "phase_diagram.csv")
    assert lines[-1].endswith("false")  # unconverged point flagged in the row
