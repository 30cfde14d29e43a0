"""Command-line front end: plan, design, simulate, report.

Exit codes: 0 success, 1 I/O failure, 2 validation error, 3 numerical
failure (including divergence), 4 no admissible gains.
"""

import argparse
import os
import sys

from . import io
from .config import PRESETS, load_config
from .errors import (
    DegenerateParametrizationError,
    DivergenceError,
    InvalidInputError,
    NoAdmissibleGainsError,
    NumericalError,
    SingularFitError,
)
from .path import joint_continuity, endpoint
from .pipeline import design_controllers, plan_path, profiles_from_curvature, scenario
from .sim import compare, simulate

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NUMERICAL, EXIT_NO_GAINS = 0, 1, 2, 3, 4


class MissingArtifactError(InvalidInputError):
    pass


def _paths(out):
    return {
        "path": os.path.join(out, "path"),
        "design": os.path.join(out, "design"),
        "sim": os.path.join(out, "sim"),
    }


def _curvature_file(out, direction):
    return os.path.join(_paths(out)["path"], f"curvature_{direction}.csv")


def _schedule_file(out, direction):
    return os.path.join(_paths(out)["design"], f"schedule_{direction}.json")


def cmd_plan(cfg, out):
    plan = plan_path(cfg)
    d = _paths(out)["path"]
    io.write_spline(os.path.join(d, "spline.csv"), plan.spline)
    io.write_csv(os.path.join(d, "waypoints.csv"), io.WAYPOINT_HEADER, plan.waypoints.points.T)
    for direction in ("forward", "backward"):
        io.write_curvature(_curvature_file(out, direction), plan.curvature[direction])
        io.write_speed(os.path.join(d, f"speed_{direction}.csv"), plan.speed[direction])
    rep = plan.spline.report
    io.write_json(os.path.join(d, "fit_report.json"), {
        "m": plan.spline.m,
        "p": plan.spline.p,
        "q": plan.spline.q,
        "segment_boundaries": list(plan.waypoints.segment_boundaries),
        "objective": rep.objective,
        "unconstrained_objective": rep.unconstrained_objective,
        "constraint_residual": rep.constraint_residual,
        "kkt_condition": rep.kkt_condition,
        "method": rep.method,
        "joint_continuity": joint_continuity(plan.spline).tolist(),
        "endpoint": list(endpoint(plan.spline)),
        "total_length": plan.curvature["forward"].total_length,
        "speed_metadata": plan.speed["forward"].metadata,
    })
    return plan


def cmd_design(cfg, out, directions):
    schedules = design_controllers(cfg, directions)
    d = _paths(out)["design"]
    for direction, sch in schedules.items():
        io.write_schedule(_schedule_file(out, direction), sch)
        for V, gmap in sch.maps.items():
            io.write_map(os.path.join(d, "maps", f"{direction}_V{V:.2f}.csv"), gmap)
    io.write_json(os.path.join(d, "dob_settings.json"), {
        "omega_n": cfg.dob.omega_n,
        "xi": cfg.dob.xi,
        "dt": cfg.dob.dt,
        "nominal_factor": cfg.dob.nominal_factor,
        "retune_threshold": cfg.dob.retune_threshold,
        "region": {"sigma_min": cfg.region.sigma_min, "zeta_min": cfg.region.zeta_min,
                   "omega_max": cfg.region.omega_max},
    })
    return schedules


def _load_or_generate(cfg, out, directions, controllers, generate):
    need_schedule = any(c != "DOB" for c in controllers)
    missing = [f for f in [_curvature_file(out, "forward")] if not os.path.exists(f)]
    if need_schedule:
        missing += [_schedule_file(out, d) for d in directions if not os.path.exists(_schedule_file(out, d))]
    if missing and not generate:
        raise MissingArtifactError("missing upstream artifacts: " + ", ".join(missing))
    if not os.path.exists(_curvature_file(out, "forward")):
        cmd_plan(cfg, out)
    fwd = io.read_curvature(_curvature_file(out, "forward"), "forward")
    curv, speed = profiles_from_curvature(fwd, cfg)
    schedules = {}
    if need_schedule:
        todo = [d for d in directions if not os.path.exists(_schedule_file(out, d))]
        if todo:
            cmd_design(cfg, out, todo)
        schedules = {d: io.read_schedule(_schedule_file(out, d)) for d in directions}
    return curv, speed, schedules


def cmd_simulate(cfg, out, directions, controllers, generate=True):
    curv, speed, schedules = _load_or_generate(cfg, out, directions, controllers, generate)
    d = _paths(out)["sim"]
    reports = {}
    for direction in directions:
        scs = [scenario(cfg, curv[direction], speed[direction], c, schedules.get(direction), direction)
               for c in controllers]
        sub = os.path.join(d, direction)
        trajs = []
        for sc in scs:
            try:
                tr = simulate(sc)
            except DivergenceError as exc:
                os.makedirs(sub, exist_ok=True)
                with open(os.path.join(sub, "report.md"), "w") as fh:
                    fh.write(f"### {direction.capitalize()} motion\n\nFAILED: controller {exc.controller} "
                             f"diverged at step {exc.step}\n")
                raise
            io.write_trajectory(os.path.join(sub, f"trajectory_{sc.controller}.csv"), tr)
            trajs.append(tr)
        rep = compare(scs, trajs)
        io.write_json(os.path.join(sub, "metrics.json"), rep.to_dict())
        with open(os.path.join(sub, "report.md"), "w") as fh:
            fh.write(rep.markdown())
        reports[direction] = rep
    return reports


def cmd_report(out, directions):
    parts = []
    for direction in directions:
        f = os.path.join(_paths(out)["sim"], direction, "report.md")
        if not os.path.exists(f):
            raise MissingArtifactError(f"no simulation report at {f}; run `simulate` first")
        with open(f) as fh:
            parts.append(fh.read())
    text = "\n".join(parts)
    with open(os.path.join(out, "report.md"), "w") as fh:
        fh.write(text)
    return text


def build_parser():
    ap = argparse.ArgumentParser(prog="parktrack", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("plan", "design", "simulate", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file merged over the preset")
        p.add_argument("--preset", default="default", choices=sorted(PRESETS))
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--direction", choices=("forward", "backward", "both"))
        p.add_argument("--controllers", help="comma-separated subset of DOB,PID,PID_DOB")
        if name == "simulate":
            p.add_argument("--no-generate", action="store_true",
                           help="fail instead of producing missing plan/design artifacts")
    return ap


def run(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.direction:
        overrides["direction"] = args.direction
    if args.controllers:
        overrides["controllers"] = [c.strip() for c in args.controllers.split(",") if c.strip()]
    if args.out:
        overrides["output_dir"] = args.out
    try:
        cfg = load_config(args.config, args.preset, overrides)
        out = cfg.output_dir
        if args.command == "plan":
            cmd_plan(cfg, out)
            print(f"path artifacts written to {_paths(out)['path']}")
        elif args.command == "design":
            cmd_design(cfg, out, cfg.directions)
            print(f"controller artifacts written to {_paths(out)['design']}")
        elif args.command == "simulate":
            reports = cmd_simulate(cfg, out, cfg.directions, cfg.controllers, not args.no_generate)
            for rep in reports.values():
                print(rep.markdown())
        else:
            print(cmd_report(out, cfg.directions))
    except NoAdmissibleGainsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_GAINS
    except (DivergenceError, NumericalError, SingularFitError, DegenerateParametrizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main():
    sys.exit(run())
