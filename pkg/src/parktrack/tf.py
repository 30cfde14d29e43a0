"""Rational transfer functions and their discrete realisation."""

import numpy as np
from scipy import signal

from .errors import InvalidInputError, NumericalError


def _trim(c, rtol=0.0):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if c.size == 0:
        return np.zeros(1)
    scale = np.max(np.abs(c))
    if scale == 0:
        return np.zeros(1)
    nz = np.nonzero(np.abs(c) > rtol * scale)[0]
    return c[nz[0]:] if nz.size else np.zeros(1)


class RationalTF:
    """num(s)/den(s), coefficients in descending powers, monic denominator."""

    def __init__(self, num, den, rtol=0.0):
        num = _trim(num, rtol)
        den = _trim(den, rtol)
        if not np.any(den):
            raise InvalidInputError("zero denominator")
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise InvalidInputError("non-finite coefficients")
        lead = den[0]
        self.num = num / lead
        self.den = den / lead

    def __repr__(self):
        return f"RationalTF(num={self.num.tolist()}, den={self.den.tolist()})"

    def __call__(self, s):
        s = np.asarray(s)
        if not np.iscomplexobj(s):
            s = s.astype(float)
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def freqresp(self, omega):
        return self(1j * np.asarray(omega, dtype=float))

    @property
    def is_zero(self):
        return not np.any(self.num)

    @property
    def relative_degree(self):
        return len(self.den) - len(self.num)

    @property
    def proper(self):
        return self.relative_degree >= 0

    @property
    def dc_gain(self):
        return float(self(0.0))

    def poles(self):
        return np.roots(self.den)

    def zeros(self):
        return np.roots(self.num) if len(self.num) > 1 else np.zeros(0)

    def scaled(self, k):
        return RationalTF(k * self.num, self.den)

    def __mul__(self, other):
        if np.isscalar(other):
            return self.scaled(other)
        return RationalTF(np.polymul(self.num, other.num), np.polymul(self.den, other.den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if other.is_zero:
            raise InvalidInputError("division by the zero transfer function")
        return RationalTF(np.polymul(self.num, other.den), np.polymul(self.den, other.num))

    def __add__(self, other):
        num = np.polyadd(np.polymul(self.num, other.den), np.polymul(other.num, self.den))
        return RationalTF(num, np.polymul(self.den, other.den))

    def __neg__(self):
        return RationalTF(-self.num, self.den)

    def __sub__(self, other):
        return self + (-other)

    def bilinear(self, dt):
        """Tustin discretisation; returns (b, a) in powers of z**-1."""
        if not self.proper:
            raise InvalidInputError("improper transfer function cannot be discretised")
        b, a = signal.bilinear(self.num, self.den, fs=1.0 / dt)
        return np.atleast_1d(b), np.atleast_1d(a)


def cancel_common(num, den, factor, tol=1e-9):
    """Divide ``factor`` out of both polynomials; raise if it does not divide."""
    out = []
    for poly in (num, den):
        q, r = np.polydiv(poly, factor)
        scale = max(np.max(np.abs(poly)), 1e-300)
        if np.max(np.abs(r)) > tol * scale:
            raise NumericalError(
                f"common-factor cancellation failed: remainder {np.max(np.abs(r)):.3e} relative to {scale:.3e}"
            )
        out.append(q)
    return out


class DiscreteFilter:
    """Direct-form II transposed IIR filter with retunable coefficients.

    ``retune`` swaps coefficients but keeps the delay-line state, which is
    what a gain-scheduled filter needs to avoid resets.
    """

    def __init__(self, b, a):
        self.z = None
        self.retune(b, a)

    def retune(self, b, a):
        b = np.asarray(b, dtype=float)
        a = np.asarray(a, dtype=float)
        if a[0] == 0:
            raise InvalidInputError("a[0] must be non-zero")
        n = max(len(a), len(b))
        # both in powers of z**-1: pad with trailing zeros
        bb = np.zeros(n)
        aa = np.zeros(n)
        bb[:len(b)] = b
        aa[:len(a)] = a
        self.b = (bb / a[0]).tolist()
        self.a = (aa / a[0]).tolist()
        order = n - 1
        if self.z is None or len(self.z) != order:
            self.z = [0.0] * order

    @property
    def feedthrough(self):
        return self.b[0]

    def pending(self):
        """Output contribution of the stored state (the part not driven by the next input)."""
        return self.z[0] if self.z else 0.0

    def step(self, x):
        b, a, z = self.b, self.a, self.z
        y = b[0] * x + (z[0] if z else 0.0)
        n = len(z)
        for i in range(n - 1):
            z[i] = b[i + 1] * x + z[i + 1] - a[i + 1] * y
        if n:
            z[n - 1] = b[n] * x - a[n] * y
        return y

    def reset(self):
        self.z = [0.0] * len(self.z)

    def state_is_finite(self):
        return all(np.isfinite(self.z))
