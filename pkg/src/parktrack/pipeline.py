"""End-to-end stages: plan the path, design controllers, build scenarios."""

from dataclasses import dataclass

import numpy as np

from .course import lane_change_anchors, reference_course
from .design import build_schedule
from .path import (
    curvature_profile,
    densify_waypoints,
    fit_path,
    reverse_profile,
    segment_waypoints,
)
from .sim import BACKWARD_START, FORWARD_START, Scenario
from .speed import build_profile, reverse_speed_profile


@dataclass
class Plan:
    waypoints: object
    spline: object
    curvature: dict   # direction -> CurvatureProfile
    speed: dict       # direction -> SpeedProfile


def anchors_for(cfg):
    path = cfg.path
    if path["anchors"] is not None:
        return np.asarray(path["anchors"], dtype=float)
    return lane_change_anchors(reference_course(path["direction_option"]))


def profiles_from_curvature(forward_curv, cfg):
    fwd_speed = build_profile(forward_curv, cfg.limits, cfg.raw["speed"]["ds"])
    return (
        {"forward": forward_curv, "backward": reverse_profile(forward_curv)},
        {"forward": fwd_speed, "backward": reverse_speed_profile(fwd_speed)},
    )


def plan_path(cfg):
    path = cfg.path
    wps = densify_waypoints(anchors_for(cfg), path["densify_count"])
    wps = segment_waypoints(wps, path["m"], path["p"])
    spline = fit_path(wps, path["p"], path["q"])
    curv, speed = profiles_from_curvature(curvature_profile(spline, path["curvature_samples"]), cfg)
    return Plan(wps, spline, curv, speed)


def design_controllers(cfg, directions=None):
    des = cfg.design
    out = {}
    for d in directions or cfg.directions:
        out[d] = build_schedule(
            cfg.vehicle, d, des["speeds"], cfg.region, K=cfg.limits.K,
            ki_candidates=des["ki_candidates"], tau_d=des["tau_d"],
            nominal_factor=cfg.dob.nominal_factor, resolution=des["resolution"],
        )
    return out


def scenario(cfg, curvature, speed, controller, schedule, direction):
    sim = cfg.simulation
    return Scenario(
        params=cfg.vehicle,
        curvature=curvature,
        speed=speed,
        controller=controller,
        schedule=schedule if controller != "DOB" else None,
        dob=cfg.dob,
        initial_pose=FORWARD_START if direction == "forward" else BACKWARD_START,
        direction=direction,
        dt=sim["dt"],
        noise=cfg.noise,
        K=cfg.limits.K,
        steer_limit=sim["steer_limit"],
    )
