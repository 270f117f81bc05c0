"""One-dimensional maximisation helpers."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10, maxiter: int = 200):
    """Golden-section search for the maximum of a unimodal ``f`` on ``[a, b]``.

    Returns ``(x, f(x))`` for the best point evaluated, endpoints included.
    """
    if b < a:
        a, b = b, a
    fa, fb = f(a), f(b)
    best = max((fa, -a, a), (fb, -b, b))
    if b - a <= tol:
        return best[2], best[0]
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    best = max(best, (fc, -c, c), (fd, -d, d))
    return best[2], best[0]


def argmax_smallest(xs, fs, rtol: float = 1e-12):
    """Index of the smallest ``x`` whose value is within ``rtol`` of the max."""
    fs = np.asarray(fs, dtype=float)
    xs = np.asarray(xs, dtype=float)
    top = np.nanmax(fs)
    near = np.flatnonzero(fs >= top - rtol * max(1.0, abs(top)))
    return int(near[np.argmin(xs[near])])


def segment_max(
    f: Callable[[float], float],
    f_vec: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    npts: int = 33,
    tol: float = 1e-10,
):
    """Maximise ``f`` on ``[a, b]``: uniform grid, then golden section in the
    bracket around the best grid point.  Ties go to the smallest abscissa."""
    if b <= a:
        return a, f(a)
    xs = np.linspace(a, b, npts)
    fs = f_vec(xs)
    k = argmax_smallest(xs, fs)
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, npts - 1)]
    x, fx = golden_max(f, lo, hi, tol=tol)
    if fx > fs[k] + 1e-12 * max(1.0, abs(fs[k])):
        return x, fx
    return float(xs[k]), float(fs[k])
