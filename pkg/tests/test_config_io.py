import json

import numpy as np
import pytest

from parktrack import io
from parktrack.config import DEFAULTS, PRESETS, load_config
from parktrack.design import GainSchedule, PidGains
from parktrack.errors import InvalidInputError
from parktrack.path import CurvatureProfile


def test_presets_resolve_to_full_defaults():
    for name in PRESETS:
        cfg = load_config(preset=name)
        assert cfg.path["m"] == 4 and cfg.path["p"] == 6 and cfg.path["q"] == 3
        assert cfg.vehicle.C_f == DEFAULTS["vehicle"]["C_f"]
        assert cfg.controllers == ["DOB", "PID", "PID_DOB"]
        assert cfg.directions == ["forward", "backward"]
    with pytest.raises(InvalidInputError):
        load_config(preset="nope")


def test_unknown_keys_rejected():
    with pytest.raises(InvalidInputError, match="unknown key"):
        load_config(overrides={"path": {"order": 3}})
    with pytest.raises(InvalidInputError, match="unknown key"):
        load_config(overrides={"colour": "red"})


@pytest.mark.parametrize("override", [
    {"path": {"q": 7, "p": 6}},
    {"path": {"m": 0}},
    {"path": {"p": 2.5}},
    {"region": {"sigma_min": 10.0, "omega_max": 5.0}},
    {"region": {"zeta_min": 1.5}},
    {"design": {"speeds": [0.5, 0.3]}},
    {"design": {"speeds": [0.05, 1.0]}},
    {"design": {"tau_d": 0.0}},
    {"design": {"resolution": 8}},
    {"simulation": {"dt": -1.0}},
    {"controllers": ["DOB", "DOB"]},
    {"controllers": ["LQR"]},
    {"direction": "sideways"},
    {"vehicle": {"M": -1.0}},
    {"speed": {"v_min": 2.0}},
])
def test_invalid_settings_rejected(override):
    with pytest.raises(InvalidInputError):
        load_config(overrides=override)


def test_config_file_merges_over_preset(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"path": {"q": 2}, "controllers": ["DOB"]}))
    cfg = load_config(str(f))
    assert cfg.path["q"] == 2 and cfg.path["p"] == 6 and cfg.controllers == ["DOB"]
    f.write_text("{not json")
    with pytest.raises(InvalidInputError):
        load_config(str(f))
    f.write_text("[1, 2]")
    with pytest.raises(InvalidInputError):
        load_config(str(f))


def test_config_json_roundtrip(tmp_path):
    cfg = load_config(overrides={"direction": "forward"})
    f = tmp_path / "c.json"
    f.write_text(cfg.to_json())
    assert load_config(str(f)).raw == cfg.raw


def test_csv_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(3)
    s = np.sort(rng.uniform(0, 10, 50))
    k = rng.normal(size=50) * 1e-3
    io.write_curvature(tmp_path / "k.csv", CurvatureProfile(s, k, float(s[-1])))
    back = io.read_curvature(tmp_path / "k.csv", "forward")
    assert np.array_equal(back.s, s) and np.array_equal(back.kappa, k)


def test_csv_header_checked(tmp_path):
    io.write_csv(tmp_path / "w.csv", io.WAYPOINT_HEADER, [[1.0], [2.0]])
    with pytest.raises(InvalidInputError):
        io.read_csv(tmp_path / "w.csv", io.CURVATURE_HEADER)


def test_spline_roundtrip(tmp_path, reference_plan):
    sp = reference_plan.spline
    io.write_spline(tmp_path / "s.csv", sp)
    back = io.read_spline(tmp_path / "s.csv", sp.q)
    assert np.array_equal(back.coeffs_x, sp.coeffs_x) and np.array_equal(back.coeffs_y, sp.coeffs_y)


def test_schedule_roundtrip(tmp_path):
    sch = GainSchedule("backward", [0.1, 0.55, 1.0],
                       [PidGains(30.1, 50.0, 0.0), PidGains(15.0, 50.0, 0.2), PidGains(9.8, 50.0, 0.0)])
    io.write_schedule(tmp_path / "g.json", sch)
    back = io.read_schedule(tmp_path / "g.json")
    assert back.direction == "backward"
    assert back.gains_at(0.3) == sch.gains_at(0.3)
