"""CSV and JSON artifacts with round-trip-exact float formatting."""

import json
import os

import numpy as np

from .design import GainSchedule
from .errors import InvalidInputError
from .path import CurvatureProfile, PathSpline
from .sim import Trajectory

FLOAT_FMT = "%.17g"


def write_csv(path, header, columns):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt=FLOAT_FMT, delimiter=",", header=",".join(header), comments="")


def read_csv(path, header):
    with open(path) as fh:
        first = fh.readline().strip()
    if first.split(",") != list(header):
        raise InvalidInputError(f"{path}: expected header {','.join(header)}, found {first}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return [data[:, i] for i in range(len(header))]


def write_json(path, obj):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


SPLINE_HEADER = ("segment", "k", "a_k", "b_k")
CURVATURE_HEADER = ("s_m", "kappa_per_m")
SPEED_HEADER = ("s_m", "v_mps", "ls_m")
MAP_HEADER = ("k_p", "k_d", "admissible")
WAYPOINT_HEADER = ("x_m", "y_m")


def write_spline(path, spline):
    m, p1 = spline.coeffs_x.shape
    seg = np.repeat(np.arange(1, m + 1), p1)
    k = np.tile(np.arange(p1), m)
    write_csv(path, SPLINE_HEADER, [seg, k, spline.coeffs_x.ravel(), spline.coeffs_y.ravel()])


def read_spline(path, q):
    seg, k, a, b = read_csv(path, SPLINE_HEADER)
    m = int(seg.max())
    p1 = int(k.max()) + 1
    if len(seg) != m * p1:
        raise InvalidInputError(f"{path}: incomplete coefficient table")
    return PathSpline(a.reshape(m, p1), b.reshape(m, p1), q, None)


def write_curvature(path, prof):
    write_csv(path, CURVATURE_HEADER, [prof.s, prof.kappa])


def read_curvature(path, direction):
    s, kappa = read_csv(path, CURVATURE_HEADER)
    return CurvatureProfile(s, kappa, float(s[-1]), direction)


def write_speed(path, prof):
    write_csv(path, SPEED_HEADER, [prof.s, prof.v, prof.ls])


def write_map(path, gmap):
    rows = gmap.rows()
    write_csv(path, MAP_HEADER, [rows[:, 0], rows[:, 1], rows[:, 2]])


def write_schedule(path, schedule):
    write_json(path, schedule.to_dict())


def read_schedule(path):
    return GainSchedule.from_dict(read_json(path))


def write_trajectory(path, traj):
    write_csv(path, Trajectory.COLUMNS, [getattr(traj, c) for c in Trajectory.COLUMNS])


def read_trajectory(path):
    cols = read_csv(path, Trajectory.COLUMNS)
    return dict(zip(Trajectory.COLUMNS, cols))
