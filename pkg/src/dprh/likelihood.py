"""Left-censored log-likelihood of the DPRH model.

An observation is ``(t1, d1, t2, d2)`` with ``t = max(Y, C)`` and ``d = 1`` when the
lifetime itself was seen. Each pair falls in one of eight index sets:

====  ============  ==========  ==================================
set   (d1, d2)      order       contribution
====  ============  ==========  ==================================
1     (1, 1)        t1 > t2     joint density
2     (1, 1)        t1 < t2     joint density
3     (1, 0)        t1 > t2     dF/dy1 (observed coordinate larger)
4     (0, 1)        t2 > t1     dF/dy2
5     (1, 0)        t1 < t2     dF/dy1 (observed coordinate smaller)
6     (0, 1)        t2 < t1     dF/dy2
7     (0, 0)        t1 > t2     F(t1, t2)
8     (0, 0)        t1 < t2     F(t1, t2)
====  ============  ==========  ==================================

Ties of censored values go to the lower set id. Every contribution is evaluated
in log space and summed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .baselines import BaselineDistribution
from .model import (
    DprhParams,
    ModelError,
    _log_delta_phi,
    log_joint_cdf,
    log_joint_pdf,
    log_partial_cdf,
)

CSV_COLUMNS = ("t1", "d1", "t2", "d2")


class DataError(ValueError):
    """Malformed or unusable observations."""


@dataclass(frozen=True)
class CensoredPair:
    t1: float
    t2: float
    d1: int = 1
    d2: int = 1

    def __post_init__(self):
        if self.d1 not in (0, 1) or self.d2 not in (0, 1):
            raise DataError(f"censoring flags must be 0 or 1, got ({self.d1}, {self.d2})")
        if self.d1 == 1 and self.d2 == 1 and self.t1 == self.t2:
            raise DataError(f"fully observed pair with tied values t1 = t2 = {self.t1}")


def classify(pair: CensoredPair) -> int:
    """Index-set id (1..8) of one pair."""
    t1, t2, d1, d2 = pair.t1, pair.t2, pair.d1, pair.d2
    return int(_classify_arrays(np.array([t1]), np.array([t2]), np.array([d1]), np.array([d2]))[0])


def _classify_arrays(t1, t2, d1, d2):
    sid = np.zeros(len(t1), dtype=int)
    both = (d1 == 1) & (d2 == 1)
    only1 = (d1 == 1) & (d2 == 0)
    only2 = (d1 == 0) & (d2 == 1)
    none = (d1 == 0) & (d2 == 0)
    sid[both & (t1 > t2)] = 1
    sid[both & (t1 < t2)] = 2
    sid[only1 & (t1 >= t2)] = 3
    sid[only2 & (t2 >= t1)] = 4
    sid[only1 & (t1 < t2)] = 5
    sid[only2 & (t2 < t1)] = 6
    sid[none & (t1 >= t2)] = 7
    sid[none & (t1 < t2)] = 8
    if np.any(sid == 0):
        raise DataError("fully observed pairs with tied values cannot be classified")
    return sid


class CensoredData:
    """Column-oriented sample of censored pairs with precomputed index sets."""

    def __init__(self, t1, t2, d1, d2):
        self.t1 = np.asarray(t1, dtype=float).ravel()
        self.t2 = np.asarray(t2, dtype=float).ravel()
        self.d1 = np.asarray(d1, dtype=int).ravel()
        self.d2 = np.asarray(d2, dtype=int).ravel()
        n = len(self.t1)
        if not (len(self.t2) == len(self.d1) == len(self.d2) == n):
            raise DataError("columns have different lengths")
        if not (np.all(np.isin(self.d1, (0, 1))) and np.all(np.isin(self.d2, (0, 1)))):
            raise DataError("censoring flags must be 0 or 1")
        if not (np.all(np.isfinite(self.t1)) and np.all(np.isfinite(self.t2))):
            raise DataError("observed values must be finite")
        self.set_id = _classify_arrays(self.t1, self.t2, self.d1, self.d2)
        self._masks = {k: self.set_id == k for k in range(1, 9)}
        # fixed selectors for the single-pass likelihood
        self._first_small = self.t1 < self.t2
        sid = self.set_id
        self._is_density = sid <= 2
        self._is_cdf = sid >= 7
        self._partial_small = (sid == 5) | (sid == 6) | ((sid == 4) & (self.t1 == self.t2))
        self._obs1 = self.d1 == 1

    @classmethod
    def from_pairs(cls, pairs: Iterable[CensoredPair]) -> "CensoredData":
        pairs = list(pairs)
        return cls(
            [p.t1 for p in pairs], [p.t2 for p in pairs], [p.d1 for p in pairs], [p.d2 for p in pairs]
        )

    @classmethod
    def complete(cls, y1, y2) -> "CensoredData":
        y1 = np.asarray(y1, dtype=float)
        return cls(y1, y2, np.ones(len(y1), int), np.ones(len(y1), int))

    def __len__(self):
        return len(self.t1)

    def pairs(self) -> list[CensoredPair]:
        return [
            CensoredPair(float(a), float(b), int(c), int(d))
            for a, b, c, d in zip(self.t1, self.t2, self.d1, self.d2)
        ]

    def subset(self, idx) -> "CensoredData":
        idx = np.asarray(idx)
        return CensoredData(self.t1[idx], self.t2[idx], self.d1[idx], self.d2[idx])

    def set_counts(self) -> dict[int, int]:
        return {k: int(m.sum()) for k, m in self._masks.items()}

    def mask(self, set_id: int) -> np.ndarray:
        return self._masks[set_id]

    @property
    def censored_fraction(self) -> tuple[float, float]:
        return float(1 - self.d1.mean()), float(1 - self.d2.mean())

    def __eq__(self, other):
        if not isinstance(other, CensoredData):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, c), getattr(other, c)) for c in CSV_COLUMNS
        )

    def __repr__(self):
        return f"CensoredData(n={len(self)}, sets={self.set_counts()})"


def as_data(data) -> CensoredData:
    if isinstance(data, CensoredData):
        return data
    return CensoredData.from_pairs(data)


# --------------------------------------------------------------- CSV I/O

def write_csv(data: CensoredData, path) -> None:
    """Write ``t1,d1,t2,d2`` with a header; floats use ``repr`` so reads are exact.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(data, path)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(data, fh)


def _write_rows(data: CensoredData, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for a, b, c, d in zip(data.t1, data.d1, data.t2, data.d2):
        w.writerow([repr(float(a)), int(b), repr(float(c)), int(d)])


def read_csv(path) -> CensoredData:
    rows = {c: [] for c in CSV_COLUMNS}
    errors = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing column(s) {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                vals = {c: float(row[c]) for c in CSV_COLUMNS}
                for c in ("d1", "d2"):
                    if vals[c] not in (0.0, 1.0):
                        raise ValueError(f"{c} must be 0 or 1")
            except (TypeError, ValueError) as exc:
                errors.append(f"line {lineno}: {exc}")
                continue
            for c in CSV_COLUMNS:
                rows[c].append(vals[c])
    if errors:
        raise DataError(f"{path}: " + "; ".join(errors))
    if not rows["t1"]:
        raise DataError(f"{path}: no observations")
    return CensoredData(rows["t1"], rows["t2"], rows["d1"], rows["d2"])


# ------------------------------------------------------------ likelihood

def contributions(params: DprhParams, data) -> np.ndarray:
    """Per-observation log contributions (``-inf`` marks an impossible observation)."""
    data = as_data(data)
    b = params.baseline
    L1, L2 = np.asarray(b.log_cdf(data.t1)), np.asarray(b.log_cdf(data.t2))
    lf1, lf2 = np.asarray(b.log_pdf(data.t1)), np.asarray(b.log_pdf(data.t2))
    th1, th2, tp1, tp2 = params.theta1, params.theta2, params.theta1p, params.theta2p
    T = th1 + th2
    fs = data._first_small
    Ls = np.where(fs, L1, L2)
    Ll = np.where(fs, L2, L1)
    th_s = np.where(fs, th1, th2)
    th_l = np.where(fs, th2, th1)
    thp_s = np.where(fs, tp1, tp2)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        D = T - thp_s
        ldp = _log_delta_phi(D, np.maximum(Ll - Ls, 0.0))
        log_th_l = np.log(th_l)
        dens = lf1 + lf2 + np.where(
            fs,
            math.log(tp1 * th2) + (tp1 - 1) * L1 + (T - tp1 - 1) * L2,
            math.log(th1 * tp2) + (T - tp2 - 1) * L1 + (tp2 - 1) * L2,
        )
        cdf = T * Ls + np.logaddexp(0.0, log_th_l + ldp)
        lf_obs = np.where(data._obs1, lf1, lf2)
        p_small = lf_obs + (T - 1) * Ls + np.logaddexp(np.log(th_s), np.log(thp_s) + log_th_l + ldp)
        p_large = lf_obs + log_th_l + thp_s * Ls + (D - 1) * Ll
        out = np.where(
            data._is_density, dens,
            np.where(data._is_cdf, cdf, np.where(data._partial_small, p_small, p_large)),
        )
    out = np.where(np.isneginf(Ls) | np.isnan(out), -np.inf, out)
    return out


def contributions_by_set(params: DprhParams, data) -> np.ndarray:
    """Reference evaluation of :func:`contributions`, one index set at a time."""
    data = as_data(data)
    out = np.empty(len(data))
    t1, t2 = data.t1, data.t2
    with np.errstate(invalid="ignore"):
        m = data.mask(1) | data.mask(2)
        if m.any():
            out[m] = log_joint_pdf(params, t1[m], t2[m])
        m = data.mask(3) | data.mask(5)
        if m.any():
            out[m] = log_partial_cdf(params, t1[m], t2[m], wrt=1)
        m = data.mask(4) | data.mask(6)
        if m.any():
            out[m] = log_partial_cdf(params, t1[m], t2[m], wrt=2)
        m = data.mask(7) | data.mask(8)
        if m.any():
            out[m] = log_joint_cdf(params, t1[m], t2[m])
    return np.where(np.isnan(out), -np.inf, out)


def censored_log_likelihood(params: DprhParams, data) -> float:
    c = contributions(params, data)
    if not np.all(np.isfinite(c)):
        return -math.inf
    return float(np.sum(c))


def complete_log_likelihood(params: DprhParams, y1, y2) -> float:
    """Fully observed log-likelihood in its sufficient-statistic form."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if np.any(y1 == y2):
        raise DataError("tied fully observed pairs")
    b = params.baseline
    L1, L2 = b.log_cdf(y1), b.log_cdf(y2)
    i1, i2 = y1 > y2, y1 < y2
    m1, m2 = int(i1.sum()), int(i2.sum())
    s_max = L1[i1].sum() + L2[i2].sum()
    return float(
        m1 * math.log(params.theta1) + params.theta1 * s_max
        + m2 * math.log(params.theta2) + params.theta2 * s_max
        + m2 * math.log(params.theta1p) + params.theta1p * (L1[i2].sum() - L2[i2].sum())
        + m1 * math.log(params.theta2p) + params.theta2p * (L2[i1].sum() - L1[i1].sum())
        + b.log_pdf(y1).sum() + b.log_pdf(y2).sum() - L1.sum() - L2.sum()
    )


def complete_mle_closed_form(data, baseline: BaselineDistribution) -> tuple[float, float, float, float]:
    """Closed-form MLE of (theta1, theta2, theta1', theta2') for complete data and fixed baseline."""
    if isinstance(data, CensoredData):
        if not (np.all(data.d1 == 1) and np.all(data.d2 == 1)):
            raise DataError("closed form requires fully observed pairs")
        y1, y2 = data.t1, data.t2
    else:
        arr = np.asarray(data, dtype=float)
        y1, y2 = arr[:, 0], arr[:, 1]
    L1, L2 = baseline.log_cdf(y1), baseline.log_cdf(y2)
    i1, i2 = y1 > y2, y1 < y2
    m1, m2 = int(i1.sum()), int(i2.sum())
    if m1 == 0 or m2 == 0:
        raise DataError(f"closed-form MLE needs both orderings present (m1={m1}, m2={m2})")
    s_max = L1[i1].sum() + L2[i2].sum()
    gap2 = L2[i2].sum() - L1[i2].sum()
    gap1 = L1[i1].sum() - L2[i1].sum()
    if s_max == 0 or gap1 == 0 or gap2 == 0 or not np.isfinite(s_max):
        raise DataError("degenerate sums in closed-form MLE")
    return (-m1 / s_max, -m2 / s_max, m2 / gap2, m1 / gap1)


def params_with(params: DprhParams, **changes) -> DprhParams:
    d = {k: getattr(params, k) for k in ("theta1", "theta2", "theta1p", "theta2p")}
    base = dict(params.baseline.params)
    for k, v in changes.items():
        if k in d:
            d[k] = v
        elif k in base:
            base[k] = v
        else:
            raise KeyError(k)
    return DprhParams(**d, baseline=params.baseline.with_params(**base) if base != params.baseline.params else params.baseline)


__all__ = [
    "CensoredPair", "CensoredData", "DataError", "ModelError", "classify", "contributions",
    "censored_log_likelihood", "complete_log_likelihood", "complete_mle_closed_form",
    "read_csv", "write_csv", "as_data", "CSV_COLUMNS",
]
