"""Left-censored sample generation.

The Inverse Weibull path with tied theta follows the five-uniform construction:
censoring times ``c_j = z_j U_j``, a coin ``U3`` picks which coordinate is the
larger, the larger is drawn from ``F0^(2 theta)`` and the smaller from its
conditional law given the larger. Given the larger value ``m`` of coordinate
``l``, the ratio ``F0(Y_s) / F0(m)`` has CDF ``r^theta_s'``, so the smaller
coordinate solves ``F0(t_s) = F0(m) F0(z)`` with ``F0(z)^theta_s' = U5``. For the
Inverse Weibull baseline this is ``t_s^-alpha = m^-alpha + z^-alpha``.

The thresholds ``z_j`` solve ``(1/z) int_0^z F_Yj(c) dc = p``: the probability
that ``Y_j`` falls below a censoring time uniform on ``(0, z_j)``.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .baselines import InverseWeibull
from .likelihood import CensoredData
from .model import EPS_CASE, DprhParams, marginal_cdf


class SamplingError(RuntimeError):
    pass


def iw_joint_cdf_tied(theta, theta1p, theta2p, alpha, y1, y2):
    """Joint CDF for the Inverse Weibull baseline with theta1 = theta2 = theta."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    y1, y2 = np.broadcast_arrays(y1, y2)
    lo, hi = np.minimum(y1, y2), np.maximum(y1, y2)
    thp = np.where(y1 < y2, theta1p, theta2p)
    gap = lo ** -alpha - hi ** -alpha  # >= 0
    base = np.exp(-2 * theta * hi ** -alpha)
    den = 2 * theta - thp
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        generic = base * (
            (theta - thp) / den * np.exp(-2 * theta * gap) + theta / den * np.exp(-thp * gap)
        )
        # 2 theta = theta_i': F = F0(lo)^(2 theta) (1 + theta * gap)
        limit = np.exp(-2 * theta * lo ** -alpha) * (1 + theta * gap)
    out = np.where(np.abs(den) <= EPS_CASE, limit, generic)
    out = np.where((y1 <= 0) | (y2 <= 0), 0.0, out)
    return out[()] if out.ndim == 0 else out


def censoring_fraction(marginal: Callable[[float], float], z: float) -> float:
    """(1/z) * integral_0^z F(c) dc."""
    if z <= 0:
        return 0.0
    val, _ = integrate.quad(marginal, 0.0, z, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val / z


def solve_censoring_threshold(marginal: Callable[[float], float], p: float, z_max: float = 1e6) -> float:
    """Scale z of a Uniform(0, z) censoring time giving P(Y <= C) = p."""
    if not 0 < p < 1:
        raise SamplingError(f"censoring proportion must be in (0, 1), got {p}")
    g = lambda z: censoring_fraction(marginal, z) - p  # noqa: E731
    hi = 1.0
    while g(hi) < 0:
        hi *= 2
        if hi > z_max:
            raise SamplingError(f"no threshold found below z = {z_max:g} for p = {p}")
    lo = hi / 2
    while lo > 1e-300 and g(lo) > 0:
        lo /= 2
    z = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(z)


@lru_cache(maxsize=64)
def censoring_thresholds(params: DprhParams, p: float) -> tuple[float, float]:
    if p == 0:
        return 0.0, 0.0
    return tuple(
        solve_censoring_threshold(lambda c, j=j: float(marginal_cdf(params, j, c)), p) for j in (1, 2)
    )


def _censor(t1, t2, u1, u2, z1, z2) -> CensoredData:
    c1, c2 = z1 * u1, z2 * u2
    return CensoredData(np.maximum(t1, c1), np.maximum(t2, c2), (t1 >= c1).astype(int), (t2 >= c2).astype(int))


def generate_sample(theta, theta1p, theta2p, alpha, n: int, p: float = 0.0, seed=None) -> CensoredData:
    """Tied-theta Inverse Weibull sample of n left-censored pairs."""
    if not 0 <= p < 1:
        raise SamplingError(f"censoring proportion must be in [0, 1), got {p}")
    params = DprhParams(theta, theta, theta1p, theta2p, InverseWeibull(alpha=alpha))
    z1, z2 = censoring_thresholds(params, p)
    u = np.random.default_rng(seed).random((n, 5))
    # U = 0 has probability zero but would give an infinite value
    u = np.where(u == 0.0, np.finfo(float).tiny, u)
    top = (-np.log(u[:, 3]) / (2 * theta)) ** (-1 / alpha)
    first_top = u[:, 2] >= 0.5
    thp_small = np.where(first_top, theta2p, theta1p)
    low = (top ** -alpha - np.log(u[:, 4]) / thp_small) ** (-1 / alpha)
    t1 = np.where(first_top, top, low)
    t2 = np.where(first_top, low, top)
    return _censor(t1, t2, u[:, 0], u[:, 1], z1, z2)


def generate_sample_general(params: DprhParams, n: int, p: float = 0.0, seed=None) -> CensoredData:
    """Same five-uniform construction for any baseline, by inverting F0.

    The coin threshold is theta2 / (theta1 + theta2) so coordinate 1 is the larger
    with probability theta1 / (theta1 + theta2); it is 1/2 under tied theta.
    """
    if not 0 <= p < 1:
        raise SamplingError(f"censoring proportion must be in [0, 1), got {p}")
    z1, z2 = censoring_thresholds(params, p)
    u = np.random.default_rng(seed).random((n, 5))
    u = np.where(u == 0.0, np.finfo(float).tiny, u)
    b = params.baseline
    T = params.total
    log_top = np.log(u[:, 3]) / T
    first_top = u[:, 2] >= params.theta2 / T
    thp_small = np.where(first_top, params.theta2p, params.theta1p)
    log_low = log_top + np.log(u[:, 4]) / thp_small
    top = b.quantile(np.exp(log_top))
    low = b.quantile(np.exp(log_low))
    t1 = np.where(first_top, top, low)
    t2 = np.where(first_top, low, top)
    return _censor(t1, t2, u[:, 0], u[:, 1], z1, z2)
