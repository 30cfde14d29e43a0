"""Modified Akima piecewise cubic Hermite interpolation.

Slopes follow the "makima" weighting: each node slope is a weighted mean of
the neighbouring secant slopes, with weights

    w1 = |d[i+1] - d[i]| + |d[i+1] + d[i]| / 2
    w2 = |d[i-1] - d[i-2]| + |d[i-1] + d[i-2]| / 2

so flat runs stay flat and collinear data produce no overshoot.
"""

import numpy as np

from .errors import InvalidInputError


def makima_slopes(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    h = np.diff(x)
    d = np.diff(y) / h
    # two ghost secants on each side by linear extrapolation
    ext = np.empty(n + 3)
    ext[2:n + 1] = d
    ext[1] = 2.0 * d[0] - d[1]
    ext[0] = 2.0 * ext[1] - d[0]
    ext[n + 1] = 2.0 * d[-1] - d[-2]
    ext[n + 2] = 2.0 * ext[n + 1] - d[-1]

    dd = np.abs(np.diff(ext))
    ss = np.abs(ext[1:] + ext[:-1]) / 2.0
    w = dd + ss
    w1 = w[2:n + 2]   # |d[i+1] - d[i]| term
    w2 = w[0:n]       # |d[i-1] - d[i-2]| term
    left = ext[1:n + 1]
    right = ext[2:n + 2]
    denom = w1 + w2
    slopes = np.zeros(n)
    ok = denom > 0
    slopes[ok] = (w1[ok] * left[ok] + w2[ok] * right[ok]) / denom[ok]
    # both weights vanish only when all four secants are zero
    return slopes


class Makima:
    """Callable modified-Akima interpolant of y(x).

    Parameters
    ----------
    x : array_like
        Strictly increasing abscissae, at least 3 of them.
    y : array_like
        Ordinates, same length as ``x``.
    """

    def __init__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise InvalidInputError("x and y must be 1-D arrays of equal length")
        if len(x) < 3:
            raise InvalidInputError("modified Akima needs at least 3 nodes")
        if np.any(np.diff(x) <= 0):
            raise InvalidInputError("abscissae must be strictly increasing (duplicate node?)")
        self.x = x
        self.y = y
        self.slopes = makima_slopes(x, y)

    def __call__(self, xq, nu=0):
        xq = np.asarray(xq, dtype=float)
        x, y, m = self.x, self.y, self.slopes
        i = np.clip(np.searchsorted(x, xq, side="right") - 1, 0, len(x) - 2)
        h = x[i + 1] - x[i]
        t = (xq - x[i]) / h
        y0, y1, m0, m1 = y[i], y[i + 1], m[i] * h, m[i + 1] * h
        if nu == 0:
            h00 = 2 * t**3 - 3 * t**2 + 1
            h10 = t**3 - 2 * t**2 + t
            h01 = -2 * t**3 + 3 * t**2
            h11 = t**3 - t**2
            return h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
        if nu == 1:
            h00 = 6 * t**2 - 6 * t
            h10 = 3 * t**2 - 4 * t + 1
            h01 = -6 * t**2 + 6 * t
            h11 = 3 * t**2 - 2 * t
            return (h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1) / h
        raise InvalidInputError("only nu in {0, 1} is supported")
