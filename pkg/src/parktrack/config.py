"""Run configuration: one JSON document, validated up front, with named presets."""

import copy
import json
from dataclasses import dataclass

import numpy as np

from .design import DRegion
from .errors import InvalidInputError
from .sim import CONTROLLERS, DobSettings, NoiseSpec
from .speed import SpeedLimits
from .vehicle import VehicleParams

DEFAULTS = {
    "path": {
        "anchors": None,
        "direction_option": "left",
        "m": 4,
        "p": 6,
        "q": 3,
        "densify_count": 200,
        "curvature_samples": 2001,
    },
    "speed": {
        "a_lat_max": 0.4905,
        "a_long_max": 0.4905,
        "v_max": 1.0,
        "v_min": 0.1,
        "K": 0.5,
        "ds": 0.01,
    },
    "vehicle": {
        "C_f": 3e5,
        "C_r": 3e5,
        "l_f": 2.0,
        "l_r": 2.0,
        "M": 3000.0,
        "I_z": 5113.0,
    },
    "dob": {
        "omega_n": 100.0,
        "xi": 0.707,
        "dt": 0.001,
        "nominal_factor": 1.01,
        "retune_threshold": 0.01,
    },
    "region": {
        "sigma_min": 0.02,
        "zeta_min": 0.5,
        "omega_max": 1e4,
    },
    "design": {
        "speeds": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
        "ki_candidates": [50.0],
        "tau_d": 0.01,
        "resolution": 64,
    },
    "simulation": {
        "dt": 0.001,
        "steer_limit": 0.6,
        "noise_std": 0.0,
        "noise_seed": 0,
    },
    "controllers": list(CONTROLLERS),
    "direction": "both",
    "output_dir": "out",
}

# Every preset resolves to the full reproduction setup; each named preset
# restates the settings group it is named for.
PRESETS = {
    "default": {},
    "paper-table-1": {"path": {"m": 4, "p": 6, "q": 3}},
    "paper-table-3": {"speed": {"a_lat_max": 0.4905, "a_long_max": 0.4905, "v_max": 1.0, "K": 0.5}},
    "paper-table-4": {
        "vehicle": {"C_f": 3e5, "C_r": 3e5, "l_f": 2.0, "l_r": 2.0, "M": 3000.0, "I_z": 5113.0},
        "dob": {"omega_n": 100.0, "xi": 0.707, "dt": 0.001, "nominal_factor": 1.01},
    },
}


def _merge(base, override, where="config"):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in base:
            raise InvalidInputError(f"unknown key {where}.{key}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise InvalidInputError(f"{where}.{key} must be an object")
            out[key] = _merge(base[key], val, f"{where}.{key}")
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    limits: SpeedLimits
    vehicle: VehicleParams
    dob: DobSettings
    region: DRegion
    noise: NoiseSpec

    @property
    def path(self):
        return self.raw["path"]

    @property
    def design(self):
        return self.raw["design"]

    @property
    def simulation(self):
        return self.raw["simulation"]

    @property
    def controllers(self):
        return list(self.raw["controllers"])

    @property
    def directions(self):
        d = self.raw["direction"]
        return ["forward", "backward"] if d == "both" else [d]

    @property
    def output_dir(self):
        return self.raw["output_dir"]

    def to_json(self):
        return json.dumps(self.raw, indent=2, sort_keys=True)


def _check_int(name, v, lo):
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise InvalidInputError(f"{name} must be an integer >= {lo}, got {v!r}")


def validate(raw):
    """Build typed settings from a merged config dict, checking every section."""
    path = raw["path"]
    for name, lo in (("m", 1), ("p", 1), ("q", 0), ("densify_count", 3), ("curvature_samples", 2)):
        _check_int(f"path.{name}", path[name], lo)
    if path["q"] >= path["p"]:
        raise InvalidInputError(f"path.q={path['q']} must be below path.p={path['p']}")
    if path["direction_option"] not in ("left", "right"):
        raise InvalidInputError("path.direction_option must be 'left' or 'right'")
    if path["anchors"] is not None:
        a = np.asarray(path["anchors"], dtype=float)
        if a.ndim != 2 or a.shape[1] != 2 or len(a) < 3:
            raise InvalidInputError("path.anchors must be a list of at least 3 [x, y] pairs")

    sp = dict(raw["speed"])
    ds = sp.pop("ds")
    if not ds > 0:
        raise InvalidInputError("speed.ds must be positive")
    limits = SpeedLimits(**sp)
    vehicle = VehicleParams(**raw["vehicle"])
    dob = DobSettings(**raw["dob"])
    region = DRegion(**raw["region"])

    des = raw["design"]
    speeds = np.asarray(des["speeds"], dtype=float)
    if speeds.ndim != 1 or len(speeds) < 1 or np.any(np.diff(speeds) <= 0):
        raise InvalidInputError("design.speeds must be a strictly increasing list")
    if speeds[0] < limits.v_min - 1e-12 or speeds[-1] > limits.v_max + 1e-12:
        raise InvalidInputError("design.speeds must lie within [v_min, v_max]")
    if not des["ki_candidates"] or any(k < 0 for k in des["ki_candidates"]):
        raise InvalidInputError("design.ki_candidates must be a non-empty list of non-negative values")
    if not des["tau_d"] > 0:
        raise InvalidInputError("design.tau_d must be positive")
    _check_int("design.resolution", des["resolution"], 16)

    sim = raw["simulation"]
    if not sim["dt"] > 0 or not sim["steer_limit"] > 0:
        raise InvalidInputError("simulation.dt and simulation.steer_limit must be positive")
    noise = NoiseSpec(float(sim["noise_std"]), int(sim["noise_seed"]))

    ctrls = raw["controllers"]
    if not ctrls or any(c not in CONTROLLERS for c in ctrls) or len(set(ctrls)) != len(ctrls):
        raise InvalidInputError(f"controllers must be distinct entries of {CONTROLLERS}")
    if raw["direction"] not in ("forward", "backward", "both"):
        raise InvalidInputError("direction must be forward, backward or both")
    return RunConfig(raw, limits, vehicle, dob, region, noise)


def load_config(path=None, preset="default", overrides=None):
    """Preset, then the JSON file at ``path``, then ``overrides``; validated."""
    if preset not in PRESETS:
        raise InvalidInputError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    raw = _merge(DEFAULTS, PRESETS[preset])
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise InvalidInputError("config must be a JSON object")
        raw = _merge(raw, doc)
    if overrides:
        raw = _merge(raw, overrides)
    return validate(raw)
