"""Joint density, CDF and derived quantities of the DPRH model.

All formulas are written in terms of the log baseline CDF ``L = log F0``.
For a pair ordered as ``y_s < y_l`` let ``T = theta1 + theta2``,
``D = T - theta_s'`` and ``Delta = L_l - L_s >= 0``. The Case-1 CDF

    F = F0(y_s)^T + theta_l F0(y_s)^theta_s' (F0(y_l)^D - F0(y_s)^D) / D

equals ``F0(y_s)^T * (1 + theta_l * Delta * phi(D * Delta))`` with
``phi(x) = expm1(x) / x``. When ``|D| <= EPS_CASE`` the logarithmic limit
``phi = 1`` is used (Cases 2-4). Both terms of the bracket are positive for all
valid parameters, so no signed arithmetic is needed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .baselines import BaselineDistribution

EPS_CASE = 1e-9

THETA_NAMES = ("theta1", "theta2", "theta1p", "theta2p")


class ModelError(ValueError):
    """Invalid DPRH parameters or evaluation outside the model's domain."""


@dataclass(frozen=True)
class DprhParams:
    theta1: float
    theta2: float
    theta1p: float
    theta2p: float
    baseline: BaselineDistribution

    def __post_init__(self):
        for name in THETA_NAMES:
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ModelError(f"{name} must be a positive finite number, got {v}")

    @property
    def total(self) -> float:
        return self.theta1 + self.theta2

    def case_id(self, eps: float = EPS_CASE) -> int:
        """Degeneracy case: 1 generic, 2 if T = theta1', 3 if T = theta2', 4 if both."""
        deg1 = abs(self.total - self.theta1p) <= eps
        deg2 = abs(self.total - self.theta2p) <= eps
        return {(False, False): 1, (True, False): 2, (False, True): 3, (True, True): 4}[(deg1, deg2)]

    def swapped(self) -> "DprhParams":
        """Parameters of (Y2, Y1)."""
        return DprhParams(self.theta2, self.theta1, self.theta2p, self.theta1p, self.baseline)

    def as_dict(self) -> dict:
        d = {n: float(getattr(self, n)) for n in THETA_NAMES}
        d.update(self.baseline.params)
        return d


def _log_delta_phi(D, delta, eps=EPS_CASE):
    """log(delta * phi(D * delta)) = log(integral_0^delta exp(D u) du), stable for all D."""
    D = np.asarray(D, dtype=float)
    delta = np.asarray(delta, dtype=float)
    x = D * delta
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ad = np.abs(D)
        safe_d = np.where(ad > eps, ad, 1.0)
        # D > 0: log(expm1(x)) - log D ; D < 0: log(-expm1(x)) - log|D|
        pos = x + np.log(-np.expm1(-np.abs(x))) - np.log(safe_d)
        neg = np.log(-np.expm1(-np.abs(x))) - np.log(safe_d)
        generic = np.where(D > 0, pos, neg)
        # small |x|: log(delta) + log(phi(x)), phi(x) ~ 1 + x/2 + x^2/6
        small = np.log(delta) + np.log1p(x / 2 + x * x / 6 + x**3 / 24)
        out = np.where(ad <= eps, np.log(delta), np.where(np.abs(x) < 1e-5, small, generic))
    return out


def _ordered(p: DprhParams, y1, y2):
    """Arrays describing each point in its (smaller, larger) orientation."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    y1, y2 = np.broadcast_arrays(y1, y2)
    first_small = y1 < y2
    L1 = np.asarray(p.baseline.log_cdf(y1), dtype=float)
    L2 = np.asarray(p.baseline.log_cdf(y2), dtype=float)
    return first_small, y1, y2, L1, L2


class _Oriented(NamedTuple):
    Ls: np.ndarray
    Ll: np.ndarray
    th_s: np.ndarray
    th_l: np.ndarray
    thp_s: np.ndarray
    thp_l: np.ndarray


def _orient(p: DprhParams, first_small, L1, L2) -> _Oriented:
    return _Oriented(
        Ls=np.where(first_small, L1, L2),
        Ll=np.where(first_small, L2, L1),
        th_s=np.where(first_small, p.theta1, p.theta2),
        th_l=np.where(first_small, p.theta2, p.theta1),
        thp_s=np.where(first_small, p.theta1p, p.theta2p),
        thp_l=np.where(first_small, p.theta2p, p.theta1p),
    )


def _scalar(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


# ----------------------------------------------------------------- density

def log_joint_pdf(p: DprhParams, y1, y2):
    """Log of the joint density; ``-inf`` outside the support. Ties are rejected."""
    first_small, y1, y2, L1, L2 = _ordered(p, y1, y2)
    if np.any(y1 == y2):
        raise ModelError("joint density is undefined on the diagonal y1 == y2")
    T = p.total
    lf1 = np.asarray(p.baseline.log_pdf(y1), dtype=float)
    lf2 = np.asarray(p.baseline.log_pdf(y2), dtype=float)
    with np.errstate(invalid="ignore"):
        below = (
            math.log(p.theta1p * p.theta2)
            + (p.theta1p - 1) * L1
            + (T - p.theta1p - 1) * L2
        )
        above = (
            math.log(p.theta1 * p.theta2p)
            + (T - p.theta2p - 1) * L1
            + (p.theta2p - 1) * L2
        )
        out = lf1 + lf2 + np.where(first_small, below, above)
    out = np.where(np.isneginf(lf1) | np.isneginf(lf2), -np.inf, out)
    return _scalar(out)


def joint_pdf(p: DprhParams, y1, y2):
    return np.exp(log_joint_pdf(p, y1, y2))


# --------------------------------------------------------------------- CDF

def log_joint_cdf(p: DprhParams, y1, y2):
    first_small, y1, y2, L1, L2 = _ordered(p, y1, y2)
    o = _orient(p, first_small, L1, L2)
    T = p.total
    D = T - o.thp_s
    with np.errstate(invalid="ignore"):
        delta = np.maximum(o.Ll - o.Ls, 0.0)
        ldp = _log_delta_phi(D, delta)
        out = T * o.Ls + np.logaddexp(0.0, np.log(o.th_l) + ldp)
    out = np.where(np.isneginf(o.Ls), -np.inf, out)
    return _scalar(out)


def joint_cdf(p: DprhParams, y1, y2):
    """F(y1, y2), continuous through the degenerate cases."""
    return np.exp(log_joint_cdf(p, y1, y2))


def joint_cdf_cases(p: DprhParams, y1: float, y2: float) -> float:
    """Scalar CDF evaluated with the literal four-case closed forms.

    Kept separate from :func:`joint_cdf` as a cross-check; it loses precision when
    ``theta1 + theta2`` is close to, but outside the band around, ``theta_i'``.
    """
    G1 = float(p.baseline.cdf(y1))
    G2 = float(p.baseline.cdf(y2))
    T = p.total
    if y1 <= y2:
        if G1 == 0.0:
            return 0.0
        D = T - p.theta1p
        if abs(D) <= EPS_CASE:
            return G1**T * (1 + p.theta2 * math.log(G2 / G1))
        return G1**T + p.theta2 * G1**p.theta1p / D * (G2**D - G1**D)
    if G2 == 0.0:
        return 0.0
    D = T - p.theta2p
    if abs(D) <= EPS_CASE:
        return G2**T * (1 + p.theta1 * math.log(G1 / G2))
    return G2**T + p.theta1 * G2**p.theta2p / D * (G1**D - G2**D)


def log_partial_cdf(p: DprhParams, y1, y2, wrt: int):
    """log dF/dy_wrt at (y1, y2)."""
    if wrt not in (1, 2):
        raise ValueError("wrt must be 1 or 2")
    first_small, y1, y2, L1, L2 = _ordered(p, y1, y2)
    o = _orient(p, first_small, L1, L2)
    T = p.total
    lf1 = np.asarray(p.baseline.log_pdf(y1), dtype=float)
    lf2 = np.asarray(p.baseline.log_pdf(y2), dtype=float)
    # at a tie both branches give theta_wrt f0 F0^(T-1); the orientation puts
    # coordinate 1 on the larger side there
    wrt_small = first_small if wrt == 1 else ~first_small
    lf_wrt = lf1 if wrt == 1 else lf2
    with np.errstate(invalid="ignore", divide="ignore"):
        delta = np.maximum(o.Ll - o.Ls, 0.0)
        D_s = T - o.thp_s
        ldp = _log_delta_phi(D_s, delta)
        small = lf_wrt + (T - 1) * o.Ls + np.logaddexp(
            np.log(o.th_s), np.log(o.thp_s * o.th_l) + ldp
        )
        large = lf_wrt + np.log(o.th_l) + o.thp_s * o.Ls + (D_s - 1) * o.Ll
        out = np.where(wrt_small, small, large)
    out = np.where(np.isneginf(o.Ls) | np.isneginf(lf_wrt), -np.inf, out)
    return _scalar(out)


def partial_cdf(p: DprhParams, y1, y2, wrt: int):
    return np.exp(log_partial_cdf(p, y1, y2, wrt))


# --------------------------------------------------------------- marginals

def _marginal_parts(p: DprhParams, which: int):
    if which == 1:
        return p.theta1, p.theta2, p.theta1p
    if which == 2:
        return p.theta2, p.theta1, p.theta2p
    raise ValueError("which must be 1 or 2")


def log_marginal_cdf(p: DprhParams, which: int, y):
    th_i, th_o, thp_i = _marginal_parts(p, which)
    L = np.asarray(p.baseline.log_cdf(y), dtype=float)
    T = p.total
    with np.errstate(invalid="ignore"):
        ldp = _log_delta_phi(T - thp_i, np.maximum(-L, 0.0))
        out = T * L + np.logaddexp(0.0, math.log(th_o) + ldp)
    out = np.where(np.isneginf(L), -np.inf, out)
    return _scalar(out)


def marginal_cdf(p: DprhParams, which: int, y):
    """Marginal CDF of Y_which (mixture of F0^theta_i' and F0^T in Case 1)."""
    return np.exp(log_marginal_cdf(p, which, y))


def log_marginal_pdf(p: DprhParams, which: int, y):
    th_i, th_o, thp_i = _marginal_parts(p, which)
    L = np.asarray(p.baseline.log_cdf(y), dtype=float)
    lf = np.asarray(p.baseline.log_pdf(y), dtype=float)
    T = p.total
    with np.errstate(invalid="ignore"):
        ldp = _log_delta_phi(T - thp_i, np.maximum(-L, 0.0))
        out = lf + (T - 1) * L + np.logaddexp(math.log(th_i), math.log(thp_i * th_o) + ldp)
    out = np.where(np.isneginf(L) | np.isneginf(lf), -np.inf, out)
    return _scalar(out)


def marginal_pdf(p: DprhParams, which: int, y):
    return np.exp(log_marginal_pdf(p, which, y))


def conditional_cdf(p: DprhParams, which: int, y, given):
    """P[Y_which <= y | Y_other = given]."""
    other = 3 - which
    y1, y2 = (y, given) if which == 1 else (given, y)
    num = log_partial_cdf(p, y1, y2, wrt=other)
    den = log_marginal_pdf(p, other, given)
    return _scalar(np.clip(np.exp(num - den), 0.0, 1.0))


def max_cdf(p: DprhParams, y):
    """CDF of max(Y1, Y2): F0(y)^(theta1 + theta2)."""
    return np.exp(p.total * np.asarray(p.baseline.log_cdf(y), dtype=float))


def prob_first_exceeds(p: DprhParams, i: int) -> float:
    """P(Y_i > Y_{3-i}) = theta_i / (theta1 + theta2)."""
    if i == 1:
        return p.theta1 / p.total
    if i == 2:
        return p.theta2 / p.total
    raise ValueError("i must be 1 or 2")


# ------------------------------------------------------- dependence measures

def tp2_log_gap(p: DprhParams, quadruple) -> float:
    """log f(y11,y21) + log f(y12,y22) - log f(y12,y21) - log f(y11,y22)."""
    y11, y12, y21, y22 = (float(v) for v in quadruple)
    if not (y11 < y12 and y21 < y22):
        raise ModelError("need y11 < y12 and y21 < y22")
    if {y11, y12} & {y21, y22}:
        raise ModelError("tied coordinates between the two components")
    lf = lambda a, b: float(log_joint_pdf(p, a, b))  # noqa: E731
    return lf(y11, y21) + lf(y12, y22) - lf(y12, y21) - lf(y11, y22)


def tp2_holds(p: DprhParams, quadruple, tol: float = 1e-10) -> bool:
    return tp2_log_gap(p, quadruple) >= -tol


def local_dependence_beta(p: DprhParams, y1, y2):
    """beta = F f / (F_1 F_2); equals 1 everywhere iff theta_i' = theta_i."""
    first_small, y1, y2, L1, L2 = _ordered(p, y1, y2)
    if np.any(y1 == y2):
        raise ModelError("beta is undefined on the diagonal")
    if np.any(np.isneginf(L1) | np.isneginf(L2)):
        raise ModelError("beta is undefined where F0 = 0")
    o = _orient(p, first_small, L1, L2)
    ldp = _log_delta_phi(p.total - o.thp_s, o.Ll - o.Ls)
    lt = np.log(o.th_l)
    out = np.log(o.thp_s) + np.logaddexp(0.0, lt + ldp) - np.logaddexp(np.log(o.th_s), np.log(o.thp_s) + lt + ldp)
    return _scalar(np.exp(out))


class ReversedHazard(NamedTuple):
    diagonal: float
    off_diagonal: float
    diagonal_parts: tuple


def reversed_hazard_vector(p: DprhParams, y1: float, y2: float) -> ReversedHazard:
    """Components of the vector reversed hazard at (y1, y2).

    ``diagonal`` is (theta1 + theta2) r0 at max(y1, y2), the point from which the
    diagonal components are integrated in the density representation;
    ``off_diagonal`` is theta1' r0(y1) if y1 < y2 and theta2' r0(y2) if y1 > y2.
    At a tie only the diagonal pair is returned (off_diagonal is nan).
    """
    r0 = p.baseline.reversed_hazard
    top = max(y1, y2)
    parts = (p.theta1 * float(r0(top)), p.theta2 * float(r0(top)))
    if y1 < y2:
        off = p.theta1p * float(r0(y1))
    elif y1 > y2:
        off = p.theta2p * float(r0(y2))
    else:
        off = math.nan
    return ReversedHazard(parts[0] + parts[1], off, parts)
