"""Closed-loop path-tracking simulation and metrics.

The error dynamics are integrated with fixed-step RK4 while the steering
command is held constant over each sample.  Stiff low-speed modes are
handled by splitting a sample into equal RK4 substeps.  Arc length and
speed follow the speed profile exactly (constant acceleration between
profile samples), so the run always reaches the end of the path even
though the profile starts and ends at standstill.
"""

from bisect import bisect_right
from dataclasses import dataclass, field
import math

import numpy as np

from .design import DobCompensator, make_nominal, make_q_filter
from .errors import DivergenceError, InvalidInputError
from .vehicle import V_FLOOR, plant_tf, steering_coefficients

CONTROLLERS = ("DOB", "PID", "PID_DOB")
STEER_LIMIT = 0.6
BLOWUP = 1e6
FORWARD_START = (0.0, 0.0, 0.0)
BACKWARD_START = (15.2386, 1.3716, math.pi)


@dataclass(frozen=True)
class DobSettings:
    omega_n: float = 100.0
    xi: float = 0.707
    dt: float = 0.001
    nominal_factor: float = 1.01
    retune_threshold: float = 0.01

    def __post_init__(self):
        if not (self.omega_n > 0 and self.xi > 0 and self.dt > 0 and self.nominal_factor > 0):
            raise InvalidInputError("DOB settings must be strictly positive")
        if self.retune_threshold < 0:
            raise InvalidInputError("retune_threshold must be >= 0")


@dataclass(frozen=True)
class NoiseSpec:
    """White Gaussian measurement noise on ey."""
    std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.std < 0:
            raise InvalidInputError("noise std must be >= 0")


@dataclass
class Scenario:
    params: object
    curvature: object
    speed: object
    controller: str
    schedule: object = None
    dob: DobSettings = field(default_factory=DobSettings)
    initial_pose: tuple = FORWARD_START
    direction: str = "forward"
    dt: float = 0.001
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    spline: object = None
    initial_state: tuple = (0.0, 0.0, 0.0, 0.0)
    K: float = 0.5
    steer_limit: float = STEER_LIMIT
    v_floor: float = V_FLOOR

    def validate(self):
        if self.controller not in CONTROLLERS:
            raise InvalidInputError(f"unknown controller {self.controller!r}; expected one of {CONTROLLERS}")
        if self.direction not in ("forward", "backward"):
            raise InvalidInputError(f"unknown direction {self.direction!r}")
        if not self.dt > 0:
            raise InvalidInputError("dt must be positive")
        if self.curvature.direction != self.direction or self.speed.direction != self.direction:
            raise InvalidInputError("curvature and speed profiles must match the scenario direction")
        if abs(self.curvature.total_length - self.speed.total_length) > 1e-6 * max(1.0, self.curvature.total_length):
            raise InvalidInputError("curvature and speed profiles describe different path lengths")
        if len(self.initial_state) != 4 or len(self.initial_pose) != 3:
            raise InvalidInputError("initial_state needs 4 entries and initial_pose 3")
        if self.controller != "DOB":
            if self.schedule is None:
                raise InvalidInputError(f"{self.controller} needs a gain schedule")
            if self.schedule.direction != self.direction:
                raise InvalidInputError("gain schedule direction does not match the scenario")
            v_hi = max(float(np.max(self.speed.v)), self.v_floor)
            if not self.schedule.covers(self.v_floor, v_hi):
                raise InvalidInputError(
                    f"gain schedule spans [{self.schedule.speeds[0]:g}, {self.schedule.speeds[-1]:g}] m/s "
                    f"but the run needs [{self.v_floor:g}, {v_hi:g}] m/s"
                )


@dataclass
class Trajectory:
    t: np.ndarray
    s: np.ndarray
    beta: np.ndarray
    r: np.ndarray
    dpsi: np.ndarray
    ey: np.ndarray
    delta: np.ndarray
    delta_rate: np.ndarray
    v: np.ndarray
    kappa: np.ndarray
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    controller: str = ""
    direction: str = "forward"

    COLUMNS = ("t", "s", "beta", "r", "dpsi", "ey", "delta", "delta_rate", "v", "kappa")

    def __len__(self):
        return len(self.t)

    def table(self):
        return np.column_stack([getattr(self, c) for c in self.COLUMNS])


@dataclass(frozen=True)
class Metrics:
    max_abs_ey: float
    rms_ey: float
    max_abs_delta: float
    max_abs_delta_rate: float

    def as_dict(self):
        return {
            "max_abs_ey": self.max_abs_ey,
            "rms_ey": self.rms_ey,
            "max_abs_delta": self.max_abs_delta,
            "max_abs_delta_rate": self.max_abs_delta_rate,
        }


class Kinematics:
    """Arc length and speed versus time along a speed profile.

    Between profile samples the acceleration is constant, which gives
    closed-form s(t) and V(t).
    """

    def __init__(self, profile):
        self.s = profile.s.tolist()
        self.v = profile.v.tolist()
        self.t = profile.time_grid().tolist()
        self.T = self.t[-1]
        self.L = self.s[-1]

    def at(self, t):
        if t >= self.T:
            return self.L, 0.0
        if t <= 0.0:
            return self.s[0], self.v[0]
        i = bisect_right(self.t, t) - 1
        tau = t - self.t[i]
        h = self.t[i + 1] - self.t[i]
        v0, v1 = self.v[i], self.v[i + 1]
        a = (v1 - v0) / h if h > 0 else 0.0
        s = self.s[i] + v0 * tau + 0.5 * a * tau * tau
        return min(s, self.s[i + 1]), v0 + a * tau


class Curvature:
    """Linear interpolation of a sampled curvature profile."""

    def __init__(self, profile):
        self.s = profile.s.tolist()
        self.k = profile.kappa.tolist()

    def at(self, s):
        xs, ks = self.s, self.k
        if s <= xs[0]:
            return ks[0]
        if s >= xs[-1]:
            return ks[-1]
        i = bisect_right(xs, s) - 1
        w = (s - xs[i]) / (xs[i + 1] - xs[i])
        return ks[i] + w * (ks[i + 1] - ks[i])


class Pid:
    """Parallel PID: trapezoidal integral, Tustin-filtered derivative."""

    def __init__(self, dt):
        self.dt = dt
        self.integral = 0.0
        self.deriv = 0.0
        self.e_prev = None

    def step(self, e, g):
        dt = self.dt
        if self.e_prev is None:
            self.e_prev = e
        self.integral += 0.5 * dt * (e + self.e_prev)
        tau = g.tau_d
        self.deriv = ((2 * tau - dt) * self.deriv + 2 * g.kd * (e - self.e_prev)) / (2 * tau + dt)
        self.e_prev = e
        return g.kp * e + g.ki * self.integral + self.deriv


def _substeps(params, V, direction, ls, dt):
    # Gershgorin bound on the spectral radius; keep h * rho <= 1 (RK4 is stable to ~2.78)
    a11, a12, a21, a22, _, _ = steering_coefficients(params, V, direction)
    rho = max(abs(a11) + abs(a12), abs(a21) + abs(a22), 1.0, V + ls + V)
    return max(1, math.ceil(rho * dt))


def simulate(sc):
    """Run one closed-loop scenario to the end of the path."""
    sc.validate()
    params, direction, dt = sc.params, sc.direction, sc.dt
    kin = Kinematics(sc.speed)
    curv = Curvature(sc.curvature)
    n = max(0, math.ceil(kin.T / dt - 1e-9))
    kind = sc.controller
    use_pid = kind in ("PID", "PID_DOB")
    use_dob = kind in ("DOB", "PID_DOB")
    floor = sc.v_floor
    K = sc.K
    limit = sc.steer_limit
    rng = np.random.default_rng(sc.noise.seed)
    noise_std = sc.noise.std

    def model_speed(V):
        return V if V > floor else floor

    pid = Pid(dt) if use_pid else None
    dob = None
    tuned_v = None
    if use_dob:
        Q = make_q_filter(sc.dob.omega_n, sc.dob.xi)
        tuned_v = model_speed(kin.at(0.0)[1])
        dob = DobCompensator(make_nominal(plant_tf(params, tuned_v, K, direction), sc.dob.nominal_factor), Q, dt)

    gain_cache = {}

    def gains(Vm):
        g = gain_cache.get(Vm)
        if g is None:
            g = gain_cache[Vm] = sc.schedule.gains_at(Vm)
        return g

    def rhs(t, x, delta):
        s, V = kin.at(t)
        Vm = model_speed(V)
        ls = K * Vm
        rho = curv.at(s)
        a11, a12, a21, a22, b1, b2 = steering_coefficients(params, Vm, direction)
        beta, r, dpsi, _ = x[0], x[1], x[2], x[3]
        psi = x[6]
        return (
            a11 * beta + a12 * r + b1 * delta,
            a21 * beta + a22 * r + b2 * delta,
            r - Vm * rho,
            Vm * beta + ls * r + Vm * dpsi - ls * Vm * rho,
            V * math.cos(psi),
            V * math.sin(psi),
            r,
        )

    cols = {c: np.empty(n + 1) for c in ("t", "s", "beta", "r", "dpsi", "ey", "delta", "v", "kappa", "x", "y", "psi")}
    x = list(map(float, sc.initial_state)) + list(map(float, sc.initial_pose))

    for k in range(n + 1):
        t = k * dt
        s, V = kin.at(t)
        Vm = model_speed(V)
        meas = x[3] + (noise_std * rng.standard_normal() if noise_std > 0 else 0.0)

        u_n = pid.step(-meas, gains(Vm)) if use_pid else 0.0
        if use_dob:
            if abs(Vm - tuned_v) > sc.dob.retune_threshold:
                dob.retune(make_nominal(plant_tf(params, Vm, K, direction), sc.dob.nominal_factor))
                tuned_v = Vm
            delta = dob.command(u_n, meas, limit)
        else:
            delta = min(limit, max(-limit, u_n))

        cols["t"][k] = t
        cols["s"][k] = s
        cols["beta"][k], cols["r"][k], cols["dpsi"][k], cols["ey"][k] = x[0], x[1], x[2], x[3]
        cols["x"][k], cols["y"][k], cols["psi"][k] = x[4], x[5], x[6]
        cols["delta"][k] = delta
        cols["v"][k] = V
        cols["kappa"][k] = curv.at(s)
        if k == n:
            break

        m = _substeps(params, Vm, direction, K * Vm, dt)
        h = dt / m
        for j in range(m):
            ts = t + j * h
            k1 = rhs(ts, x, delta)
            k2 = rhs(ts + 0.5 * h, [a + 0.5 * h * b for a, b in zip(x, k1)], delta)
            k3 = rhs(ts + 0.5 * h, [a + 0.5 * h * b for a, b in zip(x, k2)], delta)
            k4 = rhs(ts + h, [a + h * b for a, b in zip(x, k3)], delta)
            x = [a + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(x, k1, k2, k3, k4)]
        if not all(math.isfinite(a) and abs(a) <= BLOWUP for a in x[:4]) or (dob and not dob.states_finite()):
            raise DivergenceError(f"{kind} diverged at step {k + 1} (t={t + dt:.3f} s)", step=k + 1, controller=kind)

    delta_rate = np.zeros(n + 1)
    delta_rate[1:] = np.diff(cols["delta"]) / dt
    return Trajectory(
        cols["t"], cols["s"], cols["beta"], cols["r"], cols["dpsi"], cols["ey"], cols["delta"], delta_rate,
        cols["v"], cols["kappa"], cols["x"], cols["y"], cols["psi"], kind, direction,
    )


def compute_metrics(traj, dt=None):
    """Max and RMS tracking error, max steering angle and rate.

    The steering rate is a backward difference of the logged angle.
    """
    ey = np.asarray(traj.ey, dtype=float)
    delta = np.asarray(traj.delta, dtype=float)
    if ey.size == 0:
        raise InvalidInputError("empty trajectory")
    if dt is None:
        dt = float(traj.t[1] - traj.t[0]) if len(traj.t) > 1 else 1.0
    rate = np.abs(np.diff(delta)) / dt
    return Metrics(
        float(np.max(np.abs(ey))),
        float(np.sqrt(np.mean(ey * ey))),
        float(np.max(np.abs(delta))),
        float(rate.max()) if rate.size else 0.0,
    )


@dataclass
class Report:
    direction: str
    labels: list
    metrics: list
    ratios: dict
    dominant: object
    trajectories: list = field(default_factory=list, repr=False)

    def metrics_by_label(self):
        return dict(zip(self.labels, self.metrics))

    def to_dict(self):
        return {
            "direction": self.direction,
            "controllers": {lab: m.as_dict() for lab, m in zip(self.labels, self.metrics)},
            "ratios_max_abs_ey": self.ratios,
            "pid_dob_dominant": self.dominant,
        }

    def markdown(self):
        rows = [
            ("Max absolute path-tracking error (m)", "max_abs_ey"),
            ("RMS path-tracking error (m)", "rms_ey"),
            ("Max absolute steering angle (rad)", "max_abs_delta"),
            ("Max absolute steering rate (rad/s)", "max_abs_delta_rate"),
        ]
        out = [f"### {self.direction.capitalize()} motion", "", "| Metric | " + " | ".join(self.labels) + " |",
               "|---|" + "---|" * len(self.labels)]
        for name, key in rows:
            out.append(f"| {name} | " + " | ".join(f"{getattr(m, key):.4e}" for m in self.metrics) + " |")
        if self.ratios:
            out.append("")
            ref = "PID_DOB" if "PID_DOB" in self.labels else self.labels[0]
            for lab, val in self.ratios.items():
                out.append(f"- max error ratio {lab} / {ref}: {val:.2f}")
        if self.dominant is not None:
            out.append(f"- PID_DOB strictly dominant on max and RMS error: {'yes' if self.dominant else 'no'}")
        return "\n".join(out) + "\n"


def _same_geometry(a, b):
    return (
        a.direction == b.direction
        and a.dt == b.dt
        and np.array_equal(a.curvature.s, b.curvature.s)
        and np.array_equal(a.curvature.kappa, b.curvature.kappa)
        and np.array_equal(a.speed.s, b.speed.s)
        and np.array_equal(a.speed.v, b.speed.v)
        and tuple(a.initial_pose) == tuple(b.initial_pose)
    )


def compare(scenarios, trajectories=None):
    """Side-by-side metrics for scenarios that differ only in controller."""
    if not scenarios:
        raise InvalidInputError("nothing to compare")
    for sc in scenarios[1:]:
        if not _same_geometry(scenarios[0], sc):
            raise InvalidInputError("scenarios must share geometry, speed profile, start pose and dt")
    if trajectories is None:
        trajectories = [simulate(sc) for sc in scenarios]
    metrics = [compute_metrics(tr, sc.dt) for tr, sc in zip(trajectories, scenarios)]
    labels = []
    for sc in scenarios:
        lab = sc.controller
        k = 2
        while lab in labels:
            lab = f"{sc.controller}#{k}"
            k += 1
        labels.append(lab)

    ref_idx = labels.index("PID_DOB") if "PID_DOB" in labels else 0
    ref = metrics[ref_idx].max_abs_ey
    ratios = {}
    for i, (lab, m) in enumerate(zip(labels, metrics)):
        if i == ref_idx:
            continue
        ratios[lab] = m.max_abs_ey / ref if ref > 0 else (1.0 if m.max_abs_ey == 0 else math.inf)

    dominant = None
    if "PID_DOB" in labels and len(labels) > 1:
        best = metrics[ref_idx]
        dominant = all(
            best.max_abs_ey < m.max_abs_ey and best.rms_ey < m.rms_ey
            for i, m in enumerate(metrics) if i != ref_idx
        )
    return Report(scenarios[0].direction, labels, metrics, ratios, dominant, list(trajectories))
