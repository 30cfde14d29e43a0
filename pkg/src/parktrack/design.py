"""Disturbance observer and parameter-space PID design.

The DOB computes

    u = u_n - (Q/G_n) y + Q u

with a unity-DC-gain second-order Q filter, so the loop behaves like the
nominal plant G_n at low frequency and rejects output disturbances.  The
outer PID is designed for G_n by mapping a D-stability region into the
(k_p, k_d) plane at fixed k_i and picking the smallest admissible gains.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NoAdmissibleGainsError, NumericalError
from .tf import DiscreteFilter, RationalTF
from .vehicle import plant_tf

NOMINAL_FACTOR = 1.01


# ---------------------------------------------------------------------------
# DOB

@dataclass(frozen=True)
class QFilter:
    omega_n: float
    xi: float

    def __post_init__(self):
        if not (self.omega_n > 0 and self.xi > 0):
            raise InvalidInputError("Q filter needs omega_n > 0 and xi > 0")

    @property
    def tf(self):
        w = self.omega_n
        return RationalTF([w * w], [1.0, 2.0 * self.xi * w, w * w])


def make_q_filter(omega_n, xi):
    return QFilter(float(omega_n), float(xi))


def make_nominal(G, factor=NOMINAL_FACTOR):
    """Nominal plant G_n = factor * G."""
    return G.scaled(factor)


class DobCompensator:
    """Discrete DOB: a Q/G_n branch on the measurement and a Q branch on the applied input.

    Both branches are Tustin discretisations at ``dt``.  Because the Q
    branch has direct feedthrough, the loop ``u = u_n - Fy y + Fq u`` is
    solved for the current sample before the filter states advance.
    """

    def __init__(self, G_n, Q, dt):
        if dt <= 0:
            raise InvalidInputError("dt must be positive")
        self.Q = Q
        self.dt = dt
        self.branch_u = DiscreteFilter(*Q.tf.bilinear(dt))
        self.branch_y = DiscreteFilter(*self._inverse_branch(G_n).bilinear(dt))

    def _inverse_branch(self, G_n):
        F = self.Q.tf / G_n
        if not F.proper:
            raise InvalidInputError(
                f"Q/G_n is improper (relative degree {F.relative_degree}); Q order must be >= that of G_n"
            )
        return F

    def retune(self, G_n):
        """Swap in a new nominal plant, keeping filter states."""
        self.branch_y.retune(*self._inverse_branch(G_n).bilinear(self.dt))

    def command(self, u_n, y, limit=None):
        fy, fu = self.branch_y, self.branch_u
        u = (u_n - fy.feedthrough * y - fy.pending() + fu.pending()) / (1.0 - fu.feedthrough)
        if limit is not None:
            u = min(limit, max(-limit, u))
        fy.step(y)
        fu.step(u)
        return u

    def states_finite(self):
        return self.branch_y.state_is_finite() and self.branch_u.state_is_finite()


def synthesize_dob(G_n, Q, dt):
    return DobCompensator(G_n, Q, dt)


def dob_loop_tfs(G, G_n, Q):
    """Closed-loop maps (y/u_n, y/d, y/n) of the DOB structure.

    With G = Ng/Dg, G_n = Nn/Dn and Q = Nq/Dq, the common characteristic
    polynomial is P = Nn (Dq - Nq) Dg + Ng Nq Dn.  When Dg and Dn coincide
    (the usual G_n = k G) the factor Dg is removed from every map.
    """
    Qtf = Q.tf if isinstance(Q, QFilter) else Q
    Ng, Dg = G.num, G.den
    Nn, Dn = G_n.num, G_n.den
    Nq, Dq = Qtf.num, Qtf.den
    one_minus_q = np.polysub(Dq, Nq)

    P = np.polyadd(np.polymul(np.polymul(Nn, one_minus_q), Dg), np.polymul(np.polymul(Ng, Nq), Dn))
    num_un = np.polymul(np.polymul(Nn, Ng), Dq)
    num_d = np.polymul(np.polymul(Nn, one_minus_q), Dg)
    num_n = -np.polymul(np.polymul(Ng, Nq), Dn)

    if len(Dg) == len(Dn) and np.array_equal(Dg, Dn):
        # P = Dg P' with P' = Nn (Dq - Nq) + Ng Nq; build the reduced maps directly
        P_red = np.polyadd(np.polymul(Nn, one_minus_q), np.polymul(Ng, Nq))
        T_un = RationalTF(num_un, np.polymul(Dg, P_red))
        T_d = RationalTF(np.polymul(Nn, one_minus_q), P_red)
        T_n = RationalTF(-np.polymul(Ng, Nq), P_red)
    elif len(Dg) == len(Dn) and np.allclose(Dg, Dn, rtol=1e-6, atol=0.0):
        # nearly equal denominators: the common factor cannot be removed reliably
        gap = float(np.max(np.abs(Dg - Dn)))
        raise NumericalError(
            f"plant and nominal denominators differ by {gap:.3e}; common-factor cancellation is ill-posed"
        )
    else:
        T_un = RationalTF(num_un, P)
        T_d = RationalTF(num_d, P)
        T_n = RationalTF(num_n, P)
    return T_un, T_d, T_n


# ---------------------------------------------------------------------------
# D-stability

@dataclass(frozen=True)
class DRegion:
    sigma_min: float = 0.02
    zeta_min: float = 0.5
    omega_max: float = 1e4

    def __post_init__(self):
        if self.sigma_min < 0:
            raise InvalidInputError("sigma_min must be >= 0")
        if not 0 <= self.zeta_min < 1:
            raise InvalidInputError("zeta_min must lie in [0, 1)")
        if not self.omega_max > self.sigma_min:
            raise InvalidInputError("omega_max must exceed sigma_min")


def d_stable(poles, region, margin=0.0):
    """True iff every pole lies in the D-region.

    Each condition must hold with slack ``margin * (1 + |s|)`` to spare;
    a negative margin relaxes the test.  A pole at exactly s = 0 is never
    admissible.
    """
    s = np.atleast_1d(np.asarray(poles, dtype=complex))
    if s.size == 0:
        return True
    return bool(_d_stable_batch(s[None, :], region, margin)[0])


def _d_stable_batch(roots, region, margin):
    mag = np.abs(roots)
    slack = margin * (1.0 + mag)
    re = roots.real
    ok = (re < 0) & (re <= -region.sigma_min - slack)
    ok &= mag <= region.omega_max - slack
    ok &= -re >= region.zeta_min * mag + slack
    return np.all(ok, axis=-1)


# ---------------------------------------------------------------------------
# PID

@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float
    tau_d: float = 0.01

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.kp, self.ki, self.kd)):
            raise InvalidInputError("gains must be finite")
        if not self.tau_d > 0:
            raise InvalidInputError("tau_d must be > 0")

    @property
    def tf(self):
        num, den = pid_polys(self.kp, self.ki, self.kd, self.tau_d)
        return RationalTF(num, den)

    def as_dict(self):
        return {"kp": self.kp, "ki": self.ki, "kd": self.kd, "tau_d": self.tau_d}


def pid_polys(kp, ki, kd, tau_d):
    """Numerator and denominator of kp + ki/s + kd s/(tau_d s + 1).

    Without integral action the pole at the origin is dropped.
    """
    filt = np.array([tau_d, 1.0]) if tau_d > 0 else np.array([1.0])
    if ki == 0:
        num = np.polyadd(kp * filt, kd * np.array([1.0, 0.0]))
        return num, filt
    num = np.polyadd(np.polyadd(kp * np.polymul(filt, [1.0, 0.0]), ki * filt), kd * np.array([1.0, 0.0, 0.0]))
    return num, np.polymul(filt, [1.0, 0.0])


def _basis(G, ki, tau_d):
    """char = P0 + kp * P1 + kd * P2 for fixed ki (unity feedback)."""
    N, D = G.num, G.den
    filt = np.array([tau_d, 1.0]) if tau_d > 0 else np.array([1.0])
    if ki == 0:
        P0 = np.polymul(filt, D)
        P1 = np.polymul(filt, N)
        P2 = np.polymul([1.0, 0.0], N)
    else:
        sfilt = np.polymul(filt, [1.0, 0.0])
        P0 = np.polyadd(np.polymul(sfilt, D), ki * np.polymul(filt, N))
        P1 = np.polymul(sfilt, N)
        P2 = np.polymul([1.0, 0.0, 0.0], N)
    n = max(len(P0), len(P1), len(P2))
    pad = lambda p: np.concatenate([np.zeros(n - len(p)), p])
    return pad(P0), pad(P1), pad(P2)


def closed_loop_poly(G, gains):
    P0, P1, P2 = _basis(G, gains.ki, gains.tau_d)
    return np.trim_zeros(P0 + gains.kp * P1 + gains.kd * P2, "f")


def closed_loop_poles(G, gains):
    return np.roots(closed_loop_poly(G, gains))


def _batch_roots(coeffs):
    lead = coeffs[:, 0]
    deg = coeffs.shape[1] - 1
    out = np.full((coeffs.shape[0], deg), np.nan + 0j)
    good = np.abs(lead) > 1e-300
    if deg == 0:
        return out
    c = coeffs[good] / lead[good, None]
    comp = np.zeros((c.shape[0], deg, deg))
    comp[:, 0, :] = -c[:, 1:]
    if deg > 1:
        comp[:, np.arange(1, deg), np.arange(deg - 1)] = 1.0
    out[good] = np.linalg.eigvals(comp)
    for k in np.nonzero(~good)[0]:
        r = np.roots(np.trim_zeros(coeffs[k], "f"))
        # a degree drop means a root went to infinity: never admissible
        out[k, : len(r)] = r
        out[k, len(r):] = np.inf
    return out


@dataclass
class AdmissibleMap:
    kp: np.ndarray
    kd: np.ndarray
    ki: float
    mask: np.ndarray              # shape (len(kd), len(kp))
    region: DRegion
    tau_d: float
    plant: RationalTF
    boundary: np.ndarray = None   # (n, 2) transition points (kp, kd)
    crb: dict = None              # sigma-edge complex root boundary trace

    @property
    def empty(self):
        return not bool(self.mask.any())

    def rows(self):
        """(kp, kd, admissible) triples, kd-major."""
        KP, KD = np.meshgrid(self.kp, self.kd)
        return np.column_stack([KP.ravel(), KD.ravel(), self.mask.ravel().astype(int)])


def _transition_points(kp, kd, mask):
    pts = []
    for i in range(len(kd)):
        for j in np.nonzero(mask[i, 1:] != mask[i, :-1])[0]:
            pts.append((0.5 * (kp[j] + kp[j + 1]), kd[i]))
    for j in range(len(kp)):
        for i in np.nonzero(mask[1:, j] != mask[:-1, j])[0]:
            pts.append((kp[j], 0.5 * (kd[i] + kd[i + 1])))
    if not pts:
        return np.zeros((0, 2))
    pts = np.array(pts)
    return pts[np.lexsort((pts[:, 0], pts[:, 1]))]


def trace_crb(G, region, ki, tau_d=0.01, omegas=None, edge="sigma"):
    """Complex root boundary of one D-region edge in the (kp, kd) plane.

    Along the edge point s(w) the characteristic equation
    P0(s) + kp P1(s) + kd P2(s) = 0 splits into two real equations that
    are solved for (kp, kd).  ``edge`` is "sigma" (s = -sigma + jw) or
    "damping" (s on the damping ray, |s| = w).
    """
    if omegas is None:
        top = region.omega_max if np.isfinite(region.omega_max) else 1e4
        omegas = np.logspace(-4, np.log10(top), 400)
    omegas = np.asarray(omegas, dtype=float)
    if edge == "sigma":
        s = -region.sigma_min + 1j * omegas
    elif edge == "damping":
        z = region.zeta_min
        s = omegas * (-z + 1j * np.sqrt(1 - z * z))
    else:
        raise InvalidInputError(f"unknown edge {edge!r}")
    P0, P1, P2 = _basis(G, ki, tau_d)
    p0, p1, p2 = np.polyval(P0, s), np.polyval(P1, s), np.polyval(P2, s)
    det = p1.real * p2.imag - p2.real * p1.imag
    scale = np.abs(p1) * np.abs(p2) + 1e-300
    ok = np.abs(det) > 1e-12 * scale
    kp = np.full(omegas.shape, np.nan)
    kd = np.full(omegas.shape, np.nan)
    kp[ok] = (-p0.real[ok] * p2.imag[ok] + p2.real[ok] * p0.imag[ok]) / det[ok]
    kd[ok] = (-p1.real[ok] * p0.imag[ok] + p0.real[ok] * p1.imag[ok]) / det[ok]
    return {"omega": omegas, "kp": kp, "kd": kd, "edge": edge}


def real_root_boundary(G, region, ki, tau_d=0.01):
    """Line c0 + c1 kp + c2 kd = 0 where a real root sits at s = -sigma_min."""
    P0, P1, P2 = _basis(G, ki, tau_d)
    s = -region.sigma_min
    return np.polyval(P0, s), np.polyval(P1, s), np.polyval(P2, s)


def admissible_gain_map(G, region, ki, kp_range=None, kd_range=None, resolution=64,
                        tau_d=0.01, margin=1e-9, kp_values=None, kd_values=None):
    """Grid the (kp, kd) plane and flag D-stable closed loops.

    Either pass ranges plus ``resolution`` (uniform grid) or explicit
    ``kp_values``/``kd_values``.  The closed loop is C(s) G(s) under unity
    negative feedback with zero reference.
    """
    if kp_values is None:
        if resolution < 16:
            raise InvalidInputError("grid resolution must be >= 16 per axis")
        kp_values = np.linspace(kp_range[0], kp_range[1], resolution)
        kd_values = np.linspace(kd_range[0], kd_range[1], resolution)
    kp_values = np.asarray(kp_values, dtype=float)
    kd_values = np.asarray(kd_values, dtype=float)
    P0, P1, P2 = _basis(G, ki, tau_d)
    KP, KD = np.meshgrid(kp_values, kd_values)
    coeffs = P0[None, :] + KP.ravel()[:, None] * P1[None, :] + KD.ravel()[:, None] * P2[None, :]
    roots = _batch_roots(coeffs)
    finite = np.all(np.isfinite(roots), axis=1)
    ok = np.zeros(len(coeffs), dtype=bool)
    ok[finite] = _d_stable_batch(roots[finite], region, margin)
    mask = ok.reshape(KP.shape)
    gmap = AdmissibleMap(kp_values, kd_values, float(ki), mask, region, tau_d, G)
    gmap.boundary = _transition_points(kp_values, kd_values, mask)
    gmap.crb = trace_crb(G, region, ki, tau_d)
    return gmap


def select_gains(gmap, rule="min-norm-on-boundary"):
    """Smallest admissible (kp, kd), stepped one cell into the region."""
    if rule != "min-norm-on-boundary":
        raise InvalidInputError(f"unknown selection rule {rule!r}")
    idx = np.argwhere(gmap.mask)
    if len(idx) == 0:
        raise NoAdmissibleGainsError("admissible set is empty")
    kd_v, kp_v = gmap.kd[idx[:, 0]], gmap.kp[idx[:, 1]]
    norm = np.hypot(kp_v, kd_v)
    best = np.lexsort((idx[:, 1], idx[:, 0], norm))[0]
    i, j = idx[best]

    ni, nj = gmap.mask.shape
    push = np.zeros(2)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            a, b = i + di, j + dj
            if (di or dj) and 0 <= a < ni and 0 <= b < nj and not gmap.mask[a, b]:
                push -= (di, dj)
    if np.any(push):
        step = np.where(np.abs(push) >= 0.5 * np.max(np.abs(push)), np.sign(push), 0).astype(int)
        a, b = i + step[0], j + step[1]
        if 0 <= a < ni and 0 <= b < nj and gmap.mask[a, b]:
            i, j = a, b
    gains = PidGains(float(gmap.kp[j]), gmap.ki, float(gmap.kd[i]), gmap.tau_d)
    if not d_stable(closed_loop_poles(gmap.plant, gains), gmap.region):
        raise NumericalError("selected gains failed the D-stability recheck")
    return gains


# ---------------------------------------------------------------------------
# schedule

@dataclass
class GainSchedule:
    direction: str
    speeds: np.ndarray
    gains: list
    maps: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.speeds = np.asarray(self.speeds, dtype=float)
        if len(self.speeds) != len(self.gains) or len(self.speeds) == 0:
            raise InvalidInputError("schedule needs one gain set per speed")
        if np.any(np.diff(self.speeds) <= 0):
            raise InvalidInputError("schedule speeds must be strictly increasing")

    def covers(self, v_lo, v_hi, tol=1e-9):
        return self.speeds[0] - tol <= v_lo and v_hi <= self.speeds[-1] + tol

    def gains_at(self, V):
        """Linear interpolation between grid speeds, clamped at the ends."""
        sp = self.speeds
        g = self.gains
        if V <= sp[0]:
            return g[0]
        if V >= sp[-1]:
            return g[-1]
        k = int(np.searchsorted(sp, V, side="right")) - 1
        w = (V - sp[k]) / (sp[k + 1] - sp[k])
        a, b = g[k], g[k + 1]
        return PidGains(
            a.kp + w * (b.kp - a.kp),
            a.ki + w * (b.ki - a.ki),
            a.kd + w * (b.kd - a.kd),
            a.tau_d,
        )

    def to_dict(self):
        return {
            "direction": self.direction,
            "interpolation": "linear",
            "entries": [{"V": float(v), **g.as_dict()} for v, g in zip(self.speeds, self.gains)],
        }

    @classmethod
    def from_dict(cls, d):
        entries = d["entries"]
        return cls(
            d["direction"],
            [e["V"] for e in entries],
            [PidGains(e["kp"], e["ki"], e["kd"], e["tau_d"]) for e in entries],
        )


def _coarse_values():
    return np.concatenate([[0.0], np.logspace(-3, 5, 41)])


def design_at_speed(G_n, region, ki_candidates, tau_d=0.01, resolution=64):
    """Pick (gains, fine map) for one scheduled plant; None if every k_i slice is empty."""
    for ki in sorted(ki_candidates):
        coarse = admissible_gain_map(G_n, region, ki, tau_d=tau_d,
                                     kp_values=_coarse_values(), kd_values=_coarse_values())
        if coarse.empty:
            continue
        idx = np.argwhere(coarse.mask)
        norm = np.hypot(coarse.kp[idx[:, 1]], coarse.kd[idx[:, 0]])
        i, j = idx[np.argmin(norm)]
        span = 2.0 * max(coarse.kp[j], coarse.kd[i], 1e-3)
        fine = admissible_gain_map(G_n, region, ki, (0.0, span), (0.0, span), resolution, tau_d)
        gmap = coarse if fine.empty else fine
        return select_gains(gmap), gmap
    return None


def build_schedule(params, direction, speeds, region, K=0.5, ki_candidates=(50.0,),
                   tau_d=0.01, nominal_factor=NOMINAL_FACTOR, resolution=64):
    """Speed-scheduled PID gains designed against the nominal plant G_n(V)."""
    speeds = np.asarray(speeds, dtype=float)
    gains, maps = [], {}
    for V in speeds:
        G_n = make_nominal(plant_tf(params, V, K, direction), nominal_factor)
        out = design_at_speed(G_n, region, ki_candidates, tau_d, resolution)
        if out is None:
            raise NoAdmissibleGainsError(f"no admissible gains at V={V:g} m/s", speed=float(V))
        g, gmap = out
        gains.append(g)
        maps[float(V)] = gmap
    return GainSchedule(direction, speeds, gains, maps)


def audit_schedule(schedule, params, region, K=0.5, nominal_factor=NOMINAL_FACTOR):
    """Independent closed-loop pole check of every schedule entry."""
    out = []
    for V, g in zip(schedule.speeds, schedule.gains):
        G_n = make_nominal(plant_tf(params, V, K, schedule.direction), nominal_factor)
        poles = closed_loop_poles(G_n, g)
        out.append((float(V), d_stable(poles, region), poles))
    return out
