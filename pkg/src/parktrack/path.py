"""Segmented polynomial path synthesis.

Pipeline: densify sparse anchors with modified Akima, split the waypoints
into segments that each hold at most one turn, then fit one polynomial per
segment and coordinate,

    x_i(lam) = sum_k a[i, k] lam**k,   y_i(lam) = sum_k b[i, k] lam**k,

minimising the squared residual subject to derivative continuity of order
``q`` at every interior joint.
"""

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .akima import Makima
from .errors import (
    DegenerateParametrizationError,
    InvalidInputError,
    SingularFitError,
)

EPS_SPEED = 1e-9
KKT_COND_LIMIT = 1e12
REFINE_STEPS = 2

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class WaypointSet:
    """Ordered waypoints plus segment partition.

    ``segment_boundaries`` holds m+1 indices ``[0, b1, ..., n]``; segment
    ``i`` owns ``points[bounds[i]:bounds[i+1]]``.
    """

    points: np.ndarray
    segment_boundaries: tuple

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidInputError("points must be an (n, 2) array")
        if np.any(np.all(np.diff(pts, axis=0) == 0, axis=1)):
            raise InvalidInputError("duplicate consecutive waypoints")
        b = tuple(int(v) for v in self.segment_boundaries)
        if len(b) < 2 or b[0] != 0 or b[-1] != len(pts) or any(np.diff(b) <= 0):
            raise InvalidInputError(f"bad segment boundaries {b} for {len(pts)} points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "segment_boundaries", b)

    @property
    def m(self):
        return len(self.segment_boundaries) - 1

    def segments(self):
        b = self.segment_boundaries
        return [self.points[b[i]:b[i + 1]] for i in range(self.m)]


@dataclass(frozen=True)
class FitReport:
    objective: float
    unconstrained_objective: float
    constraint_residual: float
    kkt_stationarity: float
    kkt_condition: float
    method: str


@dataclass(frozen=True)
class PathSpline:
    coeffs_x: np.ndarray
    coeffs_y: np.ndarray
    q: int
    report: FitReport = None

    def __post_init__(self):
        cx = np.atleast_2d(np.asarray(self.coeffs_x, dtype=float))
        cy = np.atleast_2d(np.asarray(self.coeffs_y, dtype=float))
        if cx.shape != cy.shape:
            raise InvalidInputError("x and y coefficient arrays differ in shape")
        if not (np.all(np.isfinite(cx)) and np.all(np.isfinite(cy))):
            raise InvalidInputError("non-finite spline coefficients")
        object.__setattr__(self, "coeffs_x", cx)
        object.__setattr__(self, "coeffs_y", cy)

    @property
    def m(self):
        return self.coeffs_x.shape[0]

    @property
    def p(self):
        return self.coeffs_x.shape[1] - 1

    def translated(self, dx, dy):
        cx, cy = self.coeffs_x.copy(), self.coeffs_y.copy()
        cx[:, 0] += dx
        cy[:, 0] += dy
        return PathSpline(cx, cy, self.q, self.report)


@dataclass(frozen=True)
class CurvatureProfile:
    s: np.ndarray
    kappa: np.ndarray
    total_length: float
    direction: str = "forward"

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise InvalidInputError(f"unknown direction {self.direction!r}")
        if len(self.s) != len(self.kappa) or len(self.s) < 2:
            raise InvalidInputError("profile needs matching s and kappa arrays of length >= 2")

    def at(self, s):
        """Curvature at arc length ``s`` by linear interpolation."""
        return np.interp(s, self.s, self.kappa)


# ---------------------------------------------------------------------------
# waypoints

def densify_waypoints(anchors, count=200):
    """Resample anchors along a modified-Akima curve.

    The curve is parametrised by cumulative chord length; x and y are
    interpolated separately.  All anchors appear in the output, the
    remaining points are spread over the chord intervals in proportion to
    their length.
    """
    anchors = np.asarray(anchors, dtype=float)
    if anchors.ndim != 2 or anchors.shape[1] != 2:
        raise InvalidInputError("anchors must be an (n, 2) array")
    n = len(anchors)
    if n < 3:
        raise InvalidInputError("need at least 3 anchors")
    if count < n:
        raise InvalidInputError(f"count={count} is below the anchor count {n}")
    chord = np.hypot(*np.diff(anchors, axis=0).T)
    if np.any(chord == 0):
        raise InvalidInputError("duplicated abscissa: consecutive anchors coincide")
    t = np.concatenate([[0.0], np.cumsum(chord)])
    fx, fy = Makima(t, anchors[:, 0]), Makima(t, anchors[:, 1])

    extra = count - n
    share = chord / t[-1] * extra
    alloc = np.floor(share).astype(int)
    # largest remainders first, lower index wins ties
    order = np.lexsort((np.arange(n - 1), -(share - alloc)))
    alloc[order[: extra - alloc.sum()]] += 1

    tq = [t[:1]]
    for i in range(n - 1):
        tq.append(np.linspace(t[i], t[i + 1], alloc[i] + 2)[1:])
    tq = np.concatenate(tq)
    pts = np.column_stack([fx(tq), fy(tq)])
    # anchors are reproduced exactly, not up to rounding
    knot_idx = np.concatenate([[0], np.cumsum(alloc + 1)])
    pts[knot_idx] = anchors
    return WaypointSet(pts, (0, len(pts)))


def heading_rate(points):
    """Discrete signed curvature at interior points (turn angle / mean chord)."""
    d = np.diff(points, axis=0)
    heading = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
    chord = np.hypot(d[:, 0], d[:, 1])
    return np.diff(heading) / (0.5 * (chord[:-1] + chord[1:]))


def _label_runs(labels):
    runs = []
    start = 0
    for j in range(1, len(labels) + 1):
        if j == len(labels) or labels[j] != labels[start]:
            runs.append((start, j - 1, labels[start]))
            start = j
    return runs


def _smooth(x, window):
    if window <= 1:
        return x
    pad = window // 2
    xp = np.pad(x, pad, mode="edge")
    return np.convolve(xp, np.ones(window) / window, mode="valid")


def segment_waypoints(wps, m, p=6, rel_threshold=0.05, window=None):
    """Partition waypoints into ``m`` runs, each containing at most one turn.

    Heading rate is thresholded into straight / left / right labels.  Label
    transitions are candidate boundaries, placed at the waypoint whose
    heading rate is closest to zero (lower index on ties).  Transitions
    separating two turns are mandatory; the rest are used longest-straight
    first; if candidates run out the longest segment is halved.

    Heading rate of an Akima curve is piecewise smooth with jumps at the
    anchors, so it is averaged over ``window`` points (default about n/20,
    odd) before labelling.
    """
    pts = wps.points
    n = len(pts)
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    if m > n // (p + 1):
        raise InvalidInputError(f"m={m} too large for {n} points at order p={p}")

    if window is None:
        window = max(1, n // 20) | 1
    rate = _smooth(np.concatenate([[0.0], heading_rate(pts), [0.0]]), window)
    scale = np.max(np.abs(rate))
    thr = max(rel_threshold * scale, 1e-6)
    labels = np.where(rate > thr, 1, np.where(rate < -thr, -1, 0))
    runs = _label_runs(labels)

    def crossing(j):
        # boundary between points j and j+1
        return j if abs(rate[j]) <= abs(rate[j + 1]) else j + 1

    turns = [k for k, r in enumerate(runs) if r[2] != 0]
    if len(turns) > m:
        raise InvalidInputError(f"{len(turns)} turns cannot be separated with m={m} segments")

    chosen = set()
    for a, b in zip(turns, turns[1:]):
        if b == a + 1:
            # direct sign change: split at the heading-rate zero crossing
            lo, hi = runs[a][0], runs[b][1]
            j = next(k for k in range(lo, hi) if np.sign(rate[k]) != np.sign(rate[k + 1]))
            chosen.add(crossing(j))
        else:
            chosen.add(crossing(runs[a][1]))
    optional = []
    for k in range(len(runs) - 1):
        g = crossing(runs[k][1])
        if g in chosen or g <= 0 or g >= n:
            continue
        straight = runs[k] if runs[k][2] == 0 else runs[k + 1]
        if straight[2] != 0:
            continue
        optional.append((-(straight[1] - straight[0] + 1), g))
    for _, g in sorted(optional):
        if len(chosen) >= m - 1:
            break
        chosen.add(g)
    chosen.discard(0)

    bounds = sorted(chosen | {0, n})
    while len(bounds) - 1 < m:
        lengths = np.diff(bounds)
        k = int(np.argmax(lengths))
        bounds.insert(k + 1, bounds[k] + lengths[k] // 2)
    if len(bounds) - 1 > m:
        raise InvalidInputError("segmentation produced more boundaries than requested")
    if min(np.diff(bounds)) < p + 1:
        raise InvalidInputError(f"a segment has fewer than p+1={p + 1} points: bounds {bounds}")
    return WaypointSet(pts, tuple(bounds))


def segment_parameters(wps):
    """Per-segment lambda values in [0, 1] from cumulative chord length.

    Interior joints sit midway between the last point of one segment and
    the first point of the next, so the joint is not pinned to either
    waypoint.
    """
    pts = wps.points
    chord = np.hypot(*np.diff(pts, axis=0).T)
    t = np.concatenate([[0.0], np.cumsum(chord)])
    b = wps.segment_boundaries
    joints = [t[0]] + [0.5 * (t[k - 1] + t[k]) for k in b[1:-1]] + [t[-1]]
    return [(t[b[i]:b[i + 1]] - joints[i]) / (joints[i + 1] - joints[i]) for i in range(wps.m)]


# ---------------------------------------------------------------------------
# constrained fit

def build_constraint_matrix(m, p, q):
    """Continuity matrix Gamma with Gamma @ Theta = 0.

    Rows for joint i are ``[... A | B ...]`` where row j of A holds
    k!/(k-j)! (the j-th derivative of lam**k at lam=1) and B = -diag(j!).
    Shape is ((q+1)(m-1), (p+1)m).
    """
    if m < 1 or p < 0 or q < 0:
        raise InvalidInputError("m >= 1, p >= 0, q >= 0 required")
    if q > p:
        raise InvalidInputError(f"continuity order q={q} exceeds polynomial order p={p}")
    A = np.zeros((q + 1, p + 1))
    for j in range(q + 1):
        for k in range(j, p + 1):
            A[j, k] = factorial(k) / factorial(k - j)
    B = np.zeros((q + 1, p + 1))
    B[np.arange(q + 1), np.arange(q + 1)] = [-factorial(j) for j in range(q + 1)]
    G = np.zeros(((q + 1) * (m - 1), (p + 1) * m))
    for i in range(m - 1):
        r = slice(i * (q + 1), (i + 1) * (q + 1))
        G[r, i * (p + 1):(i + 1) * (p + 1)] = A
        G[r, (i + 1) * (p + 1):(i + 2) * (p + 1)] = B
    return G


def regression_matrix(lams, p):
    """Block-diagonal Vandermonde matrix Phi."""
    m = len(lams)
    n = sum(len(l) for l in lams)
    Phi = np.zeros((n, (p + 1) * m))
    row = 0
    for i, lam in enumerate(lams):
        Phi[row:row + len(lam), i * (p + 1):(i + 1) * (p + 1)] = np.vander(lam, p + 1, increasing=True)
        row += len(lam)
    return Phi


def solve_constrained_lsq(Phi, X, Gamma, cond_limit=KKT_COND_LIMIT):
    """Minimise ||Phi th - X||^2 subject to Gamma th = 0.

    Returns ``(theta, info)``.  Columns of Phi are scaled to unit norm
    before the KKT system [2 Phi'Phi, G'; G, 0] is solved; if its
    condition number exceeds ``cond_limit`` a null-space solve is used.
    """
    Phi = np.asarray(Phi, dtype=float)
    X = np.asarray(X, dtype=float)
    nv = Phi.shape[1]
    norms = np.linalg.norm(Phi, axis=0)
    if np.any(norms == 0):
        raise SingularFitError("regression matrix has an all-zero column", condition=np.inf)
    D = 1.0 / norms
    Ps = Phi * D
    Gs = Gamma * D if Gamma.size else Gamma.reshape(0, nv)
    nc = Gs.shape[0]

    H = 2.0 * Ps.T @ Ps
    K = np.zeros((nv + nc, nv + nc))
    K[:nv, :nv] = H
    K[:nv, nv:] = Gs.T
    K[nv:, :nv] = Gs
    rhs = np.concatenate([2.0 * Ps.T @ X, np.zeros(nc)])
    cond = np.linalg.cond(K)

    if np.isfinite(cond) and cond <= cond_limit:
        lu = lu_factor(K)
        sol = lu_solve(lu, rhs)
        # refinement against the unformed problem; the residual is taken in
        # extended precision so forming Phi'Phi does not cap the accuracy
        Pl, Gl, Xl = Ps.astype(np.longdouble), Gs.astype(np.longdouble), X.astype(np.longdouble)
        for _ in range(REFINE_STEPS):
            zl, ml = sol[:nv].astype(np.longdouble), sol[nv:].astype(np.longdouble)
            r_stat = 2.0 * Pl.T @ (Xl - Pl @ zl) - Gl.T @ ml
            r_con = -(Gl @ zl)
            sol = sol + lu_solve(lu, np.concatenate([r_stat, r_con]).astype(float))
        z, mult = sol[:nv], sol[nv:]
        method = "kkt"
    else:
        # null-space method: th = Z w with Gs Z = 0
        if nc:
            _, sv, vt = np.linalg.svd(Gs)
            rank = int(np.sum(sv > sv[0] * 1e-12)) if sv.size else 0
            Z = vt[rank:].T
        else:
            Z = np.eye(nv)
        PZ = Ps @ Z
        w, _, rank_r, sv_r = np.linalg.lstsq(PZ, X, rcond=None)
        if rank_r < PZ.shape[1]:
            raise SingularFitError(
                f"rank-deficient constrained fit (KKT condition estimate {cond:.3e})", condition=cond
            )
        z = Z @ w
        mult = np.linalg.lstsq(Gs.T, -(H @ z - 2.0 * Ps.T @ X), rcond=None)[0] if nc else np.zeros(0)
        method = "nullspace"

    theta = z * D
    grad = H @ z - 2.0 * Ps.T @ X + (Gs.T @ mult if nc else 0.0)
    info = {
        "condition": float(cond),
        "method": method,
        "constraint_residual": float(np.max(np.abs(Gs @ z))) if nc else 0.0,
        "stationarity": float(np.max(np.abs(grad))),
        "objective": float(np.sum((Phi @ theta - X) ** 2)),
    }
    return theta, info


def fit_path(wps, p=6, q=3):
    """Constrained segmented polynomial fit of a segmented WaypointSet."""
    if q >= p:
        raise InvalidInputError(f"need q < p, got q={q}, p={p}")
    if q < 0:
        raise InvalidInputError("q must be non-negative")
    m = wps.m
    for i, seg in enumerate(wps.segments()):
        if len(seg) < p + 1:
            raise InvalidInputError(f"segment {i + 1} has {len(seg)} points, needs >= {p + 1}")
    lams = segment_parameters(wps)
    Phi = regression_matrix(lams, p)
    Gamma = build_constraint_matrix(m, p, q)

    thetas, infos = [], []
    for col in (0, 1):
        X = wps.points[:, col]
        th, info = solve_constrained_lsq(Phi, X, Gamma)
        thetas.append(th)
        infos.append(info)
    unconstrained = sum(
        float(np.sum((Phi @ np.linalg.lstsq(Phi, wps.points[:, c], rcond=None)[0] - wps.points[:, c]) ** 2))
        for c in (0, 1)
    )
    report = FitReport(
        objective=infos[0]["objective"] + infos[1]["objective"],
        unconstrained_objective=unconstrained,
        constraint_residual=max(i["constraint_residual"] for i in infos),
        kkt_stationarity=max(i["stationarity"] for i in infos),
        kkt_condition=max(i["condition"] for i in infos),
        method=infos[0]["method"] if infos[0]["method"] == infos[1]["method"] else "mixed",
    )
    return PathSpline(thetas[0].reshape(m, p + 1), thetas[1].reshape(m, p + 1), q, report)


# ---------------------------------------------------------------------------
# evaluation

def _deriv_coeffs(c, order):
    """Coefficients (ascending) of the ``order``-th derivative."""
    p = c.shape[-1] - 1
    if order > p:
        return np.zeros(c.shape[:-1] + (1,))
    k = np.arange(order, p + 1)
    fac = np.array([factorial(int(v)) / factorial(int(v) - order) for v in k])
    return c[..., order:] * fac


def _horner(c, lam):
    out = np.zeros_like(lam, dtype=float) + c[-1]
    for a in c[-2::-1]:
        out = out * lam + a
    return out


def _check_segment(spline, segment):
    if not 1 <= segment <= spline.m:
        raise InvalidInputError(f"segment {segment} outside [1, {spline.m}]")


def _check_lam(lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or np.any(lam > 1) or not np.all(np.isfinite(lam)):
        raise InvalidInputError("lambda must lie in [0, 1]; no extrapolation")
    return lam


def eval_path(spline, segment, lam, order=0):
    """Derivative ``d^order/dlam^order`` of (x, y) on a 1-based segment."""
    _check_segment(spline, segment)
    if order < 0 or order > spline.p:
        raise InvalidInputError(f"order must be in [0, p={spline.p}]")
    lam = _check_lam(lam)
    i = segment - 1
    cx = _deriv_coeffs(spline.coeffs_x[i], order)
    cy = _deriv_coeffs(spline.coeffs_y[i], order)
    return _horner(cx, lam), _horner(cy, lam)


def _curvature_from_derivs(x1, y1, x2, y2):
    speed = np.hypot(x1, y1)
    if np.any(speed <= EPS_SPEED):
        raise DegenerateParametrizationError("stationary point: |(x', y')| <= eps_speed")
    return (x1 * y2 - y1 * x2) / speed**3


def curvature(spline, segment, lam):
    """Signed curvature, positive for counter-clockwise turning."""
    x1, y1 = eval_path(spline, segment, lam, 1)
    x2, y2 = eval_path(spline, segment, lam, 2) if spline.p >= 2 else (0.0 * x1, 0.0 * y1)
    return _curvature_from_derivs(x1, y1, x2, y2)


def curvature_rate(spline, segment, lam):
    """d(kappa)/ds from the third parametric derivatives."""
    x1, y1 = eval_path(spline, segment, lam, 1)
    x2, y2 = eval_path(spline, segment, lam, 2)
    x3, y3 = eval_path(spline, segment, lam, 3) if spline.p >= 3 else (0.0 * x1, 0.0 * y1)
    v2 = x1 * x1 + y1 * y1
    v = np.sqrt(v2)
    cross = x1 * y2 - y1 * x2
    dcross = x1 * y3 - y1 * x3
    dv = (x1 * x2 + y1 * y2) / v
    dk_dlam = (dcross * v - 3.0 * cross * dv) / v**4
    return dk_dlam / v


def _speed(spline, i, lam):
    cx1 = _deriv_coeffs(spline.coeffs_x[i], 1)
    cy1 = _deriv_coeffs(spline.coeffs_y[i], 1)
    return np.hypot(_horner(cx1, lam), _horner(cy1, lam))


def _arc(spline, i, a, b):
    """Arc length of segment ``i`` between lam=a and lam=b (vectorised, GL-8)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[..., None] + half[..., None] * _GL_X
    return half * np.sum(_GL_W * _speed(spline, i, nodes), axis=-1)


def segment_lengths(spline, n_sub=256):
    lengths = []
    for i in range(spline.m):
        grid = np.linspace(0.0, 1.0, n_sub + 1)
        lengths.append(float(np.sum(_arc(spline, i, grid[:-1], grid[1:]))))
    return np.array(lengths)


def arc_length_table(spline, n_sub=256):
    """Cumulative arc length on a uniform lambda grid, per segment."""
    grid = np.linspace(0.0, 1.0, n_sub + 1)
    tables = []
    offset = 0.0
    for i in range(spline.m):
        cum = np.concatenate([[0.0], np.cumsum(_arc(spline, i, grid[:-1], grid[1:]))])
        tables.append(offset + cum)
        offset += cum[-1]
    return grid, tables, offset


def locate(spline, s, n_sub=256, newton_steps=4):
    """Map arc lengths to (segment index 0-based, lambda)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    grid, tables, total = arc_length_table(spline, n_sub)
    starts = np.array([t[0] for t in tables])
    seg = np.clip(np.searchsorted(starts, s, side="right") - 1, 0, spline.m - 1)
    lam = np.empty_like(s)
    for i in range(spline.m):
        sel = seg == i
        if not np.any(sel):
            continue
        tab = tables[i]
        li = np.interp(s[sel], tab, grid)
        for _ in range(newton_steps):
            k = np.clip(np.searchsorted(grid, li, side="right") - 1, 0, n_sub - 1)
            cur = tab[k] + _arc(spline, i, grid[k], li)
            li = np.clip(li - (cur - s[sel]) / _speed(spline, i, li), 0.0, 1.0)
        lam[sel] = li
    return seg, lam, total


def curvature_profile(spline, n_samples):
    """Curvature sampled at ``n_samples`` points uniformly spaced in arc length."""
    if n_samples < 2:
        raise InvalidInputError("n_samples must be >= 2")
    _, _, total = arc_length_table(spline)
    s = np.linspace(0.0, total, n_samples)
    seg, lam, _ = locate(spline, s)
    kappa = np.empty(n_samples)
    for i in range(spline.m):
        sel = seg == i
        if np.any(sel):
            kappa[sel] = curvature(spline, i + 1, lam[sel])
    return CurvatureProfile(s, kappa, float(total), "forward")


def reverse_profile(prof):
    """Curvature seen when driving the same path backwards."""
    if prof.direction != "forward":
        raise InvalidInputError("profile is already backward")
    s = prof.total_length - prof.s[::-1]
    s[0] = 0.0
    return CurvatureProfile(s, -prof.kappa[::-1], prof.total_length, "backward")


def sample_path(spline, n_per_segment=50):
    """Dense (x, y) polyline of the spline, joints included once."""
    out = []
    for i in range(spline.m):
        lam = np.linspace(0.0, 1.0, n_per_segment + 1)
        if i > 0:
            lam = lam[1:]
        x, y = eval_path(spline, i + 1, lam)
        out.append(np.column_stack([x, y]))
    return np.vstack(out)


def joint_continuity(spline, q=None):
    """Max |d^j x_i(1) - d^j x_{i+1}(0)| per joint and order, over x and y.

    Returns an array of shape (m-1, q+1).
    """
    q = spline.q if q is None else q
    table = np.zeros((max(spline.m - 1, 0), q + 1))
    for i in range(1, spline.m):
        for j in range(q + 1):
            xa, ya = eval_path(spline, i, 1.0, j)
            xb, yb = eval_path(spline, i + 1, 0.0, j)
            table[i - 1, j] = max(abs(xa - xb), abs(ya - yb))
    return table


def endpoint(spline):
    x, y = eval_path(spline, spline.m, 1.0)
    return float(x), float(y)
