"""Twin appendectomy analysis: loading, risk-free-time transform, fits and conditional probabilities.

Ages T are turned into risk-free times Y = b - T. An observed appendectomy
(status 1) gives an observed Y; a subject without appendectomy by interview
is left-censored in Y at b - age.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .likelihood import CensoredData, DataError
from .mle import FitResult, LRTResult, ModelSpec, fit_mle, likelihood_ratio_test
from .model import DprhParams, conditional_cdf
from .sampling import generate_sample_general

log = logging.getLogger(__name__)

DEFAULT_B = 80.0
TWIN_COLUMNS = ("pair_id", "zygosity", "sex", "age1", "status1", "age2", "status2")
TWIN_BASELINES = ("generalized-rayleigh", "exponentiated-gumbel", "generalized-exponential")


@dataclass(frozen=True)
class TwinRecord:
    pair_id: str
    category: int
    sex: str
    t1: float
    c1: int
    t2: float
    c2: int

    def risk_free(self, b: float = DEFAULT_B) -> tuple[float, float]:
        return b - self.t1, b - self.t2


@dataclass
class TwinLoad:
    records: list[TwinRecord]
    n_rows: int
    n_other_category: int
    n_ties: int


def _parse_status(s: str, line: int, col: str) -> int:
    v = int(float(s))
    if v not in (0, 1):
        raise DataError(f"line {line}: {col} must be 0 or 1, got {s!r}")
    return v


def load_twin_csv(path, category: int | None = 2, b: float = DEFAULT_B) -> TwinLoad:
    """Read the twin CSV, keep one zygosity category and drop simultaneous ages.

    ``category=None`` keeps every category. Malformed rows are collected and
    reported together with their line numbers.
    """
    rows, errors = [], []
    n_rows = n_other = n_ties = 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(TWIN_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing column(s) {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            n_rows += 1
            try:
                rec = TwinRecord(
                    pair_id=row["pair_id"].strip(),
                    category=int(row["zygosity"]),
                    sex=row["sex"].strip(),
                    t1=float(row["age1"]),
                    c1=_parse_status(row["status1"], line, "status1"),
                    t2=float(row["age2"]),
                    c2=_parse_status(row["status2"], line, "status2"),
                )
                for t in (rec.t1, rec.t2):
                    if not (0 < t < b and math.isfinite(t)):
                        raise DataError(f"line {line}: age {t} outside (0, {b})")
            except (ValueError, TypeError, AttributeError) as exc:
                errors.append(str(exc) if str(exc).startswith("line") else f"line {line}: {exc}")
                continue
            if category is not None and rec.category != category:
                n_other += 1
                continue
            if rec.t1 == rec.t2:
                n_ties += 1
                continue
            rows.append(rec)
    if errors:
        raise DataError(f"{path}: {len(errors)} malformed row(s):\n" + "\n".join(errors))
    if not rows:
        raise DataError(f"{path}: no records left after filtering (category={category})")
    if n_ties:
        log.info("excluded %d pair(s) with simultaneous ages", n_ties)
    return TwinLoad(rows, n_rows, n_other, n_ties)


def write_twin_csv(records: Iterable[TwinRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TWIN_COLUMNS)
        for r in records:
            w.writerow([r.pair_id, r.category, r.sex, repr(r.t1), r.c1, repr(r.t2), r.c2])


def to_censored_data(records: Sequence[TwinRecord], b: float = DEFAULT_B) -> CensoredData:
    t = np.array([[b - r.t1, b - r.t2, r.c1, r.c2] for r in records], dtype=float)
    return CensoredData(t[:, 0], t[:, 1], t[:, 2].astype(int), t[:, 3].astype(int))


def twin_spec(family: str, independent: bool = False) -> ModelSpec:
    return ModelSpec(family, tie_theta=True, tie_theta_prime=True, independence=independent)


def analyze(records: Sequence[TwinRecord], family: str, b: float = DEFAULT_B, **fit_kw) -> FitResult:
    """Fit the model with theta1 = theta2 and theta1' = theta2'."""
    if len(records) < 10:
        raise DataError(f"analysis needs at least 10 records, got {len(records)}")
    fit = fit_mle(to_censored_data(records, b), twin_spec(family), **fit_kw)
    if family == "generalized-rayleigh":
        # alpha multiplies every DPRH exponent, so only alpha*theta and alpha*theta' are identified
        a = fit.params_hat.baseline.params["alpha"]
        fit.warnings.append(
            "generalized-rayleigh: only alpha*theta = %.6g and alpha*theta' = %.6g are identified"
            % (a * fit.params_hat.theta1, a * fit.params_hat.theta1p)
        )
    return fit


def compare_baselines(records, families: Sequence[str] = TWIN_BASELINES, b: float = DEFAULT_B, **fit_kw):
    """Fits per family, sorted by AIC (best first)."""
    fits = {f: analyze(records, f, b, **fit_kw) for f in families}
    return dict(sorted(fits.items(), key=lambda kv: kv[1].aic))


def dependence_lrt(records, family: str, b: float = DEFAULT_B, **fit_kw) -> LRTResult:
    """H0: theta' = theta (independent twins) against the tied dependent model."""
    data = to_censored_data(records, b)
    return likelihood_ratio_test(data, twin_spec(family, independent=True), twin_spec(family), **fit_kw)


@dataclass(frozen=True)
class ConditionalProb:
    probability: float
    target: int  # twin whose potential appendectomy is assessed
    ambiguous: bool  # conditioning twin's age is a censoring age


def potential_appendectomy_prob(params: DprhParams, record: TwinRecord, b: float = DEFAULT_B) -> ConditionalProb:
    """P[Y_target <= y_target | Y_other = y_other], conditioning on the twin with the smaller age.

    The smaller age means the larger risk-free time, so y_target < y_other.
    In age terms this is the chance the target twin's appendectomy happens after
    their recorded age, given the co-twin's. When the conditioning twin's age is
    a censoring age the probability is still computed but flagged.
    """
    y1, y2 = record.risk_free(b)
    if y1 == y2:
        raise DataError(f"pair {record.pair_id}: simultaneous ages have no ordering")
    target, other = (1, 2) if y1 < y2 else (2, 1)
    y_t, y_o = (y1, y2) if target == 1 else (y2, y1)
    prob = float(conditional_cdf(params, target, y_t, y_o))
    c_other = record.c2 if other == 2 else record.c1
    return ConditionalProb(prob, target, ambiguous=c_other == 0)


def validation_report(params: DprhParams, records: Sequence[TwinRecord], threshold: float = 0.5, b: float = DEFAULT_B, probs=None) -> dict:
    """Share of pairs where the probability agrees with the target twin's status.

    A pair is consistent when (probability >= threshold) coincides with the
    target twin not having had an appendectomy. ``probs`` overrides the model
    probabilities (one per record).
    """
    rows = []
    for i, r in enumerate(records):
        cp = potential_appendectomy_prob(params, r, b)
        prob = cp.probability if probs is None else float(probs[i])
        c_target = r.c1 if cp.target == 1 else r.c2
        consistent = (prob >= threshold) == (c_target == 0)
        rows.append(
            {
                "pair_id": r.pair_id,
                "t1": r.t1,
                "c1": r.c1,
                "t2": r.t2,
                "c2": r.c2,
                "target": cp.target,
                "probability": prob,
                "ambiguous": cp.ambiguous,
                "consistent": consistent,
            }
        )
    n = len(rows)
    return {
        "threshold": threshold,
        "n": n,
        "consistent": sum(r["consistent"] for r in rows),
        "fraction": sum(r["consistent"] for r in rows) / n if n else math.nan,
        "n_ambiguous": sum(r["ambiguous"] for r in rows),
        "rows": rows,
    }


def write_probability_csv(report: dict, path) -> None:
    cols = ("pair_id", "t1", "c1", "t2", "c2", "target", "probability", "ambiguous", "consistent")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in report["rows"]:
            w.writerow([r[c] if not isinstance(r[c], bool) else int(r[c]) for c in cols])


def synthetic_twin_records(params: DprhParams, n: int, p: float, seed, b: float = DEFAULT_B, category: int = 2) -> list[TwinRecord]:
    """Twin-like records drawn from the model, ages rounded to one decimal."""
    data = generate_sample_general(params, n, p, seed)
    out = []
    for i, (y1, y2, d1, d2) in enumerate(zip(data.t1, data.t2, data.d1, data.d2)):
        t1, t2 = float(round(b - y1, 1)), float(round(b - y2, 1))
        if not (0 < t1 < b and 0 < t2 < b):
            continue
        out.append(TwinRecord(f"S{i + 1:03d}", category, "MM", t1, int(d1), t2, int(d2)))
    return out
