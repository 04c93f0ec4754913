"""Independent numerical oracles shared by the tests (quadrature and finite differences)."""
import math

import numpy as np
from scipy import integrate

from dprh.baselines import InverseWeibull
from dprh.model import DprhParams, joint_pdf

QUAD = dict(epsabs=1e-11, epsrel=1e-9, limit=200)


def quad_joint_cdf(p, y1, y2, lo=0.0):
    """Integral of joint_pdf over (lo, y1] x (lo, y2], split along the diagonal."""

    def inner(u1):
        tot = 0.0
        below = min(u1, y2)
        if below > lo:
            tot += integrate.quad(lambda u2: joint_pdf(p, u1, u2), lo, below, **QUAD)[0]
        if y2 > u1:
            tot += integrate.quad(lambda u2: joint_pdf(p, u1, u2), u1, y2, **QUAD)[0]
        return tot

    pts = [y2] if lo < y2 < y1 else None
    return integrate.quad(inner, lo, y1, points=pts, **QUAD)[0]


def quad_total_mass(p, nodes=200, tol=1e-9):
    """Integral of joint_pdf over (0, inf)^2 in log coordinates s = log y.

    The density jumps across the diagonal, so the inner integral is split there;
    each smooth side uses vectorized Gauss-Legendre and the outer integral is
    adaptive. Limits are baseline quantiles far enough out that the neglected
    mass is below 1e-10.
    """
    b = p.baseline
    s_lo, s_hi = math.log(b.quantile(1e-60)), math.log(b.quantile(1 - 1e-14))
    x, w = np.polynomial.legendre.leggauss(nodes)

    def side(s, a, c):
        if c <= a:
            return 0.0
        t = 0.5 * (c - a) * x + 0.5 * (c + a)
        vals = joint_pdf(p, np.full_like(t, math.exp(s)), np.exp(t)) * np.exp(t)
        return 0.5 * (c - a) * float(w @ vals)

    def inner(s):
        return (side(s, s_lo, s) + side(s, s, s_hi)) * math.exp(s)

    return integrate.quad(inner, s_lo, s_hi, epsabs=tol, epsrel=tol, limit=400)[0]


def quad_joint_cdf_log(p, y1, y2, nodes=200, tol=1e-10):
    """Integral of joint_pdf over (0, y1] x (0, y2] with the log-coordinate scheme of quad_total_mass."""
    b = p.baseline
    s_lo = math.log(b.quantile(1e-60))
    l1, l2 = math.log(y1), math.log(y2)
    x, w = np.polynomial.legendre.leggauss(nodes)

    def side(s, a, c):
        if c <= a:
            return 0.0
        t = 0.5 * (c - a) * x + 0.5 * (c + a)
        vals = joint_pdf(p, np.full_like(t, math.exp(s)), np.exp(t)) * np.exp(t)
        return 0.5 * (c - a) * float(w @ vals)

    def inner(s):
        return (side(s, s_lo, min(s, l2)) + side(s, s, l2)) * math.exp(s)

    pts = [l2] if s_lo < l2 < l1 else None
    return integrate.quad(inner, s_lo, l1, points=pts, epsabs=tol, epsrel=tol, limit=400)[0]


def central_diff(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


def mixed_diff(F, y1, y2, h):
    return (F(y1 + h, y2 + h) - F(y1 + h, y2 - h) - F(y1 - h, y2 + h) + F(y1 - h, y2 - h)) / (4 * h * h)


def params_for_case(rng, case, baseline=None):
    """Random IW-based parameters lying exactly in degeneracy case 1-4."""
    base = baseline or InverseWeibull(alpha=float(rng.uniform(0.8, 2.5)))
    t1, t2 = rng.uniform(0.4, 2.5, 2)
    T = t1 + t2
    p1, p2 = rng.uniform(0.3, 3.5, 2)
    while abs(p1 - T) < 0.2:
        p1 = rng.uniform(0.3, 3.5)
    while abs(p2 - T) < 0.2:
        p2 = rng.uniform(0.3, 3.5)
    if case in (2, 4):
        p1 = T
    if case in (3, 4):
        p2 = T
    return DprhParams(float(t1), float(t2), float(p1), float(p2), base)


def off_diagonal_points(rng, n, lo=0.3, hi=4.0):
    pts = []
    while len(pts) < n:
        a, b = rng.uniform(lo, hi, 2)
        if abs(a - b) > 0.05:
            pts.append((float(a), float(b)))
    return pts
