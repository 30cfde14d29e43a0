import filecmp
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from parktrack import io
from parktrack.cli import EXIT_INVALID, EXIT_NO_GAINS, EXIT_OK, run
from parktrack.sim import Trajectory


def files_under(root):
    out = []
    for d, _, names in os.walk(root):
        out += [os.path.relpath(os.path.join(d, n), root) for n in names]
    return sorted(out)


@pytest.fixture(scope="module")
def forward_run(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("run"))
    assert run(["simulate", "--out", out, "--direction", "forward"]) == EXIT_OK
    return out


def test_plan_writes_artifacts(tmp_path):
    out = str(tmp_path)
    assert run(["plan", "--out", out]) == EXIT_OK
    for f in ("spline.csv", "waypoints.csv", "curvature_forward.csv", "curvature_backward.csv",
              "speed_forward.csv", "fit_report.json"):
        assert os.path.exists(os.path.join(out, "path", f)), f
    rep = json.load(open(os.path.join(out, "path", "fit_report.json")))
    assert rep["constraint_residual"] <= 1e-9
    assert len(rep["joint_continuity"]) == 3
    s, k = io.read_csv(os.path.join(out, "path", "curvature_forward.csv"), io.CURVATURE_HEADER)
    # two S-lobes: curvature changes sign and each sign carries a sizeable lobe
    assert k.max() > 0.1 and k.min() < -0.1
    assert abs(s[np.argmax(k)] - s[np.argmin(k)]) > 0.2 * s[-1]


def test_plan_straight_course_has_zero_curvature(tmp_path):
    cfg = tmp_path / "line.json"
    cfg.write_text(json.dumps({"path": {"anchors": [[0, 0], [5, 0], [10, 0]], "m": 1}}))
    assert run(["plan", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    _, k = io.read_csv(str(tmp_path / "o" / "path" / "curvature_forward.csv"), io.CURVATURE_HEADER)
    assert np.max(np.abs(k)) < 1e-9


def test_validation_error_before_any_output(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"path": {"q": 7, "p": 6}}))
    assert run(["plan", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_INVALID
    assert not os.path.exists(tmp_path / "o")


def test_degenerate_region_is_validation_error(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"region": {"sigma_min": 2.0, "omega_max": 1.0}}))
    assert run(["design", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_INVALID


def test_no_admissible_gains_exit_code(tmp_path):
    cfg = tmp_path / "tight.json"
    cfg.write_text(json.dumps({"region": {"sigma_min": 5000.0, "zeta_min": 0.9, "omega_max": 6000.0},
                               "design": {"speeds": [0.1, 1.0]}}))
    code = run(["design", "--config", str(cfg), "--out", str(tmp_path / "o"), "--direction", "forward"])
    assert code == EXIT_NO_GAINS


def test_design_symmetric_vehicle_schedules_identical(tmp_path):
    out = str(tmp_path)
    assert run(["design", "--out", out]) == EXIT_OK
    a = os.path.join(out, "design", "schedule_forward.json")
    b = os.path.join(out, "design", "schedule_backward.json")
    fa, fb = json.load(open(a)), json.load(open(b))
    fa.pop("direction"), fb.pop("direction")
    assert fa == fb
    assert len(fa["entries"]) >= 3
    assert os.path.exists(os.path.join(out, "design", "dob_settings.json"))
    assert any(n.startswith("forward_V") for n in os.listdir(os.path.join(out, "design", "maps")))


def test_simulate_outputs(forward_run):
    sub = os.path.join(forward_run, "sim", "forward")
    for c in ("DOB", "PID", "PID_DOB"):
        f = os.path.join(sub, f"trajectory_{c}.csv")
        with open(f) as fh:
            assert fh.readline().strip() == "t,s,beta,r,dpsi,ey,delta,delta_rate,v,kappa"
        cols = io.read_trajectory(f)
        assert set(cols) == set(Trajectory.COLUMNS)
    md = open(os.path.join(sub, "report.md")).read()
    assert "| Metric | DOB | PID | PID_DOB |" in md and "PID_DOB" in md
    metrics = json.load(open(os.path.join(sub, "metrics.json")))
    assert metrics["pid_dob_dominant"] is True
    assert min(metrics["ratios_max_abs_ey"].values()) >= 10


def test_pipeline_is_byte_identical(forward_run, tmp_path):
    out = str(tmp_path)
    assert run(["simulate", "--out", out, "--direction", "forward"]) == EXIT_OK
    names = files_under(out)
    assert names == files_under(forward_run)
    _, mismatch, errors = filecmp.cmpfiles(out, forward_run, names, shallow=False)
    assert not mismatch and not errors


def test_single_controller_report(forward_run, tmp_path):
    out = str(tmp_path)
    assert run(["simulate", "--out", out, "--direction", "forward", "--controllers", "DOB"]) == EXIT_OK
    md = open(os.path.join(out, "sim", "forward", "report.md")).read()
    assert "| Metric | DOB |" in md and "PID" not in md
    # DOB alone needs no gain schedule, so design is skipped
    assert not os.path.exists(os.path.join(out, "design"))


def test_no_generate_with_missing_artifacts(tmp_path):
    out = str(tmp_path / "o")
    assert run(["simulate", "--out", out, "--no-generate"]) == EXIT_INVALID
    assert not os.path.exists(out)


def test_report_combines_directions(forward_run):
    assert run(["report", "--out", forward_run, "--direction", "forward"]) == EXIT_OK
    assert "Forward" in open(os.path.join(forward_run, "report.md")).read()


def test_report_without_simulation(tmp_path):
    assert run(["report", "--out", str(tmp_path)]) == EXIT_INVALID


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "parktrack", "plan", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    bad = subprocess.run([sys.executable, "-m", "parktrack", "plan", "--preset", "nope"],
                         capture_output=True, text=True)
    assert bad.returncode == 2
