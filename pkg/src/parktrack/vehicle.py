"""Linear single-track path-tracking model, scheduled on speed.

State order is (beta, r, dpsi, ey): side slip, yaw rate, heading error and
lateral error at the preview point.  Inputs are the active steering angle,
reference curvature and a yaw-moment disturbance.

Reverse driving is modelled as a rear-steer vehicle driving forward: the
axle parameters are exchanged (C_f <-> C_r, l_f <-> l_r) and the rear
steering column becomes the active input.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import matrix_balance

from .errors import InvalidInputError, NumericalError
from .tf import RationalTF

V_FLOOR = 0.1
OUTPUT = np.array([0.0, 0.0, 0.0, 1.0])


@dataclass(frozen=True)
class VehicleParams:
    C_f: float
    C_r: float
    l_f: float
    l_r: float
    M: float
    I_z: float

    def __post_init__(self):
        for name in ("C_f", "C_r", "l_f", "l_r", "M", "I_z"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidInputError(f"{name} must be strictly positive, got {v}")

    def swapped(self):
        return replace(self, C_f=self.C_r, C_r=self.C_f, l_f=self.l_r, l_r=self.l_f)

    @property
    def wheelbase(self):
        return self.l_f + self.l_r


REFERENCE_VEHICLE = VehicleParams(C_f=3e5, C_r=3e5, l_f=2.0, l_r=2.0, M=3000.0, I_z=5.113e3)


@dataclass(frozen=True)
class PlantModel:
    A: np.ndarray
    B_steer: np.ndarray
    B_rho: np.ndarray
    B_Mzd: np.ndarray
    V: float
    l_s: float
    direction: str
    params: VehicleParams

    @property
    def C(self):
        return OUTPUT


def lateral_coefficients(params, V):
    """Scalar entries of the lateral dynamics at speed ``V``.

    Returns ``(a11, a12, a21, a22, bf1, bf2, br1, br2)`` for the
    (beta, r) block and the front/rear steering columns.
    """
    Cf, Cr, lf, lr, M, Iz = params.C_f, params.C_r, params.l_f, params.l_r, params.M, params.I_z
    skew = Cr * lr - Cf * lf
    return (
        -(Cf + Cr) / (M * V),
        -1.0 + skew / (M * V * V),
        skew / Iz,
        -(Cf * lf * lf + Cr * lr * lr) / (Iz * V),
        Cf / (M * V),
        Cf * lf / Iz,
        Cr / (M * V),
        Cr * lr / Iz,
    )


def model_matrices(params, V, l_s):
    """Matrices of the forward model with both steering columns.

    Returns ``(A, B_front, B_rear, B_rho, B_Mzd)``.
    """
    a11, a12, a21, a22, bf1, bf2, br1, br2 = lateral_coefficients(params, V)
    A = np.array([
        [a11, a12, 0.0, 0.0],
        [a21, a22, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [V, l_s, V, 0.0],
    ])
    B_front = np.array([bf1, bf2, 0.0, 0.0])
    B_rear = np.array([br1, br2, 0.0, 0.0])
    B_rho = np.array([0.0, 0.0, -V, -l_s * V])
    B_Mzd = np.array([0.0, 1.0 / params.I_z, 0.0, 0.0])
    return A, B_front, B_rear, B_rho, B_Mzd


def steering_coefficients(params, V, direction):
    """(a11, a12, a21, a22, b1, b2) with the active steering column for ``direction``."""
    if direction == "forward":
        a11, a12, a21, a22, b1, b2, _, _ = lateral_coefficients(params, V)
    else:
        a11, a12, a21, a22, _, _, b1, b2 = lateral_coefficients(params.swapped(), V)
    return a11, a12, a21, a22, b1, b2


def assemble_model(params, V, l_s, direction="forward", v_floor=V_FLOOR):
    """Path-tracking model at speed ``V`` and preview distance ``l_s``."""
    if direction not in ("forward", "backward"):
        raise InvalidInputError(f"unknown direction {direction!r}")
    if not np.isfinite(V) or V < v_floor:
        raise InvalidInputError(f"speed {V} below the model floor {v_floor} (model is singular at V=0)")
    if l_s < 0:
        raise InvalidInputError("preview distance must be non-negative")
    if direction == "forward":
        A, B_f, _, B_rho, B_Mzd = model_matrices(params, V, l_s)
        B = B_f
    else:
        A, _, B_r, B_rho, B_Mzd = model_matrices(params.swapped(), V, l_s)
        B = B_r
    return PlantModel(A, B, B_rho, B_Mzd, float(V), float(l_s), direction, params)


def leverrier(A):
    """Characteristic polynomial and adjugate coefficients of (sI - A).

    Returns ``(c, Ms)`` with ``det(sI - A) = sum c[k] s**(n-k)`` (c[0] = 1)
    and ``adj(sI - A) = sum Ms[k] s**(n-1-k)``.
    """
    n = A.shape[0]
    c = np.zeros(n + 1)
    c[0] = 1.0
    Ms = []
    Mk = np.zeros_like(A)
    eye = np.eye(n)
    for k in range(1, n + 1):
        Mk = A @ Mk + c[k - 1] * eye
        Ms.append(Mk)
        c[k] = -np.trace(A @ Mk) / k
    return c, Ms


def steering_to_error_tf(plant, check_point=1.0):
    """Transfer function from the active steering angle to ey.

    The (beta, r) block drives two pure integrators, so

        ey = [V s beta(s) + (l_s s + V) r(s)] / s**2

    with beta, r the responses of the 2x2 lateral block.  The s**2 factor
    of the denominator is therefore exact.  The result is checked against
    a direct resolvent solve at ``check_point``.
    """
    A, b, V, ls = plant.A, plant.B_steer, plant.V, plant.l_s
    a11, a12, a21, a22 = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
    b1, b2 = b[0], b[1]
    d2 = np.array([1.0, -(a11 + a22), a11 * a22 - a12 * a21])
    n_beta = np.array([b1, a12 * b2 - a22 * b1])
    n_r = np.array([b2, a21 * b1 - a11 * b2])
    num = np.polyadd(V * np.polymul([1.0, 0.0], n_beta), np.polymul([ls, V], n_r))
    den = np.concatenate([d2, [0.0, 0.0]])
    if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
        raise NumericalError(f"non-finite transfer-function coefficients at V={V}")
    G = RationalTF(num, den)
    s0 = check_point
    x = np.linalg.solve(s0 * np.eye(4) - A, b)
    direct = plant.C @ x
    if abs(G(s0) - direct) > 1e-8 * max(abs(direct), 1e-300):
        raise NumericalError(
            f"transfer function disagrees with resolvent at s={s0}: {G(s0).real:.6e} vs {direct:.6e}; "
            f"cond(sI-A)={np.linalg.cond(s0 * np.eye(4) - A):.3e}"
        )
    return G


def leverrier_tf(plant):
    """General-purpose route: Leverrier-Faddeev on the balanced state matrix."""
    Ab, T = matrix_balance(plant.A, permute=False)
    scale = np.diag(T)
    c, Ms = leverrier(Ab)
    num = np.array([(plant.C * scale) @ Mk @ (plant.B_steer / scale) for Mk in Ms])
    return RationalTF(num, c)


def plant_tf(params, V, K, direction="forward", v_floor=V_FLOOR):
    """Steering-to-error transfer function at scheduled speed ``V`` with l_s = K V."""
    return steering_to_error_tf(assemble_model(params, V, K * V, direction, v_floor))
