"""Arc-length speed and preview-distance scheduling."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

G = 9.81


@dataclass(frozen=True)
class SpeedLimits:
    a_lat_max: float = 0.05 * G
    a_long_max: float = 0.05 * G
    v_max: float = 1.0
    v_min: float = 0.1
    K: float = 0.5

    def __post_init__(self):
        for name in ("a_lat_max", "a_long_max", "v_max", "v_min", "K"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidInputError(f"{name} must be strictly positive, got {v}")
        if self.v_min >= self.v_max:
            raise InvalidInputError("v_min must be below v_max")


@dataclass(frozen=True)
class SpeedProfile:
    s: np.ndarray
    v: np.ndarray
    ls: np.ndarray
    direction: str = "forward"
    metadata: dict = field(default_factory=dict)

    @property
    def total_length(self):
        return float(self.s[-1])

    def time_grid(self):
        """Elapsed time at each sample, exact for constant acceleration per interval."""
        ds = np.diff(self.s)
        vs = self.v[:-1] + self.v[1:]
        dt = np.divide(2.0 * ds, vs, out=np.zeros_like(ds), where=vs > 0)
        return np.concatenate([[0.0], np.cumsum(dt)])


def preview_distance(V, K):
    """Preview distance l_s = K * V."""
    V = np.asarray(V, dtype=float)
    if np.any(V < 0):
        raise InvalidInputError("speed must be non-negative")
    out = K * V
    return float(out) if out.ndim == 0 else out


def build_profile(curv, limits, ds=0.01):
    """Maximal speed profile under lateral, longitudinal and speed caps.

    The curvature cap sqrt(a_lat/|kappa|) and v_max bound V pointwise;
    a forward and a backward sweep on V**2 then bound the acceleration
    |dV**2/ds| <= 2 a_long, starting and ending at standstill.
    """
    L = float(curv.total_length)
    if L <= 0:
        s = np.array([0.0, 0.0])
        v = np.zeros(2)
        return SpeedProfile(s, v, limits.K * v, curv.direction,
                            {"triangular": True, "curvature_limited": False, "lateral_infeasible": False})
    n = max(1, int(np.ceil(L / ds - 1e-9)))
    s = np.linspace(0.0, L, n + 1)
    h = s[1] - s[0]
    kappa = np.abs(curv.at(s))
    with np.errstate(divide="ignore", over="ignore"):
        cap = np.where(kappa > 0, np.sqrt(limits.a_lat_max / kappa), np.inf)
    v2 = np.minimum(cap, limits.v_max) ** 2
    v2[0] = v2[-1] = 0.0
    two_a_h = 2.0 * limits.a_long_max * h
    for i in range(1, n + 1):
        v2[i] = min(v2[i], v2[i - 1] + two_a_h)
    for i in range(n - 1, -1, -1):
        v2[i] = min(v2[i], v2[i + 1] + two_a_h)
    v = np.sqrt(v2)
    peak = float(v.max())
    meta = {
        "triangular": peak < limits.v_min,
        "curvature_limited": bool(np.any(cap < limits.v_max)),
        "lateral_infeasible": bool(np.any(cap < limits.v_min)),
        "peak_speed": peak,
    }
    return SpeedProfile(s, v, limits.K * v, curv.direction, meta)


def reverse_speed_profile(prof):
    """Same profile traversed from the far end."""
    s = prof.total_length - prof.s[::-1]
    s[0] = 0.0
    direction = "backward" if prof.direction == "forward" else "forward"
    return SpeedProfile(s, prof.v[::-1].copy(), prof.ls[::-1].copy(), direction, dict(prof.metadata))
