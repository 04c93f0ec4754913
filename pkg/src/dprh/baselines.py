"""Baseline distributions for the DPRH family.

Every baseline exposes its CDF and density in log space. The DPRH layer raises
the baseline CDF to powers such as ``theta1 + theta2 - theta1p - 1`` and direct
exponentiation underflows long before the log form does.

Families are looked up by a lowercase key (``"inverse-weibull"``,
``"generalized-rayleigh"``, ...) so that CLI flags and JSON configs can name them.

Note on the generalized Rayleigh family: its shape ``alpha`` multiplies the
DPRH exponents in the joint density, so ``alpha`` and the theta parameters are
only jointly identifiable through that product structure.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import ClassVar

import numpy as np
from scipy import optimize


class BaselineError(ValueError):
    """Invalid baseline family or parameter value."""


def _log1mexp(x):
    """log(1 - exp(x)) for x <= 0, accurate across the whole range."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > -math.log(2.0), np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


@dataclass(frozen=True)
class BaselineDistribution:
    """Base class. Subclasses are frozen dataclasses whose fields are the parameters."""

    key: ClassVar[str] = ""
    # parameters allowed to take any real value; everything else must be > 0
    real_params: ClassVar[tuple[str, ...]] = ()

    def __post_init__(self):
        for name, value in self.params.items():
            if not np.isfinite(value):
                raise BaselineError(f"{self.key}: parameter {name}={value} is not finite")
            if name not in self.real_params and value <= 0:
                raise BaselineError(f"{self.key}: parameter {name} must be > 0, got {value}")

    @property
    def params(self) -> dict[str, float]:
        return {k: float(v) for k, v in asdict(self).items()}

    @classmethod
    def param_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def with_params(self, **kwargs) -> "BaselineDistribution":
        return replace(self, **kwargs)

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    # subclasses implement these on the open support
    def _log_cdf(self, y):
        raise NotImplementedError

    def _log_pdf(self, y):
        raise NotImplementedError

    def _quantile(self, u):
        return None

    def _inside(self, y):
        a, b = self.support
        return (y > a) & (y < b)

    def log_cdf(self, y):
        y = np.asarray(y, dtype=float)
        a, b = self.support
        inside = self._inside(y)
        ys = np.where(inside, y, self._interior_point())
        with np.errstate(over="ignore", under="ignore", divide="ignore"):
            out = np.where(inside, self._log_cdf(ys), np.where(y <= a, -np.inf, 0.0))
        return out[()] if out.ndim == 0 else out

    def log_pdf(self, y):
        y = np.asarray(y, dtype=float)
        inside = self._inside(y)
        ys = np.where(inside, y, self._interior_point())
        with np.errstate(over="ignore", under="ignore", divide="ignore"):
            out = np.where(inside, self._log_pdf(ys), -np.inf)
        return out[()] if out.ndim == 0 else out

    def cdf(self, y):
        return np.exp(self.log_cdf(y))

    def pdf(self, y):
        return np.exp(self.log_pdf(y))

    def reversed_hazard(self, y):
        """f0(y) / F0(y); raises where F0(y) = 0."""
        lc = self.log_cdf(y)
        if np.any(np.isneginf(lc)):
            raise BaselineError(f"{self.key}: reversed hazard undefined where F0(y) = 0")
        return np.exp(self.log_pdf(y) - lc)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u >= 1)) or np.any(np.isnan(u)):
            raise BaselineError("quantile requires 0 < u < 1")
        with np.errstate(over="ignore", divide="ignore"):
            q = self._quantile(u)
        if q is None:
            q = np.vectorize(self._bisect_quantile)(u)
        q = np.asarray(q, dtype=float)
        return q[()] if q.ndim == 0 else q

    def _interior_point(self) -> float:
        a, b = self.support
        if math.isinf(a) and math.isinf(b):
            return 0.0
        if math.isinf(b):
            return a + 1.0
        return 0.5 * (a + b)

    def _bisect_quantile(self, u: float) -> float:
        # fallback for families without a closed-form inverse
        target = math.log(u)
        a, b = self.support
        lo = a if math.isfinite(a) else -1.0
        hi = b if math.isfinite(b) else self._interior_point() + 1.0
        if not math.isfinite(a):
            while self.log_cdf(lo) > target:
                lo = lo * 2 if lo < 0 else lo - 1
        while math.isinf(b) and self.log_cdf(hi) < target:
            hi = hi * 2 if hi > 0 else hi + 1
        return optimize.brentq(lambda y: float(self.log_cdf(y)) - target, lo, hi, xtol=1e-12, rtol=1e-14)

    def to_dict(self) -> dict:
        return {"family": self.key, "params": self.params}


@dataclass(frozen=True)
class ExponentiatedGumbel(BaselineDistribution):
    """F0(y) = exp(-exp(-lam*y)) on the real line."""

    lam: float = 1.0
    key: ClassVar[str] = "exponentiated-gumbel"

    @property
    def support(self):
        return (-math.inf, math.inf)

    def _log_cdf(self, y):
        return -np.exp(-self.lam * y)

    def _log_pdf(self, y):
        return math.log(self.lam) - self.lam * y - np.exp(-self.lam * y)

    def _quantile(self, u):
        return -np.log(-np.log(u)) / self.lam


@dataclass(frozen=True)
class GeneralizedExponential(BaselineDistribution):
    """F0(y) = 1 - exp(-lam*y), y > 0."""

    lam: float = 1.0
    key: ClassVar[str] = "generalized-exponential"

    def _log_cdf(self, y):
        return _log1mexp(-self.lam * y)

    def _log_pdf(self, y):
        return math.log(self.lam) - self.lam * y

    def _quantile(self, u):
        return -np.log1p(-u) / self.lam


@dataclass(frozen=True)
class GeneralizedInverseRayleigh(BaselineDistribution):
    """F0(y) = 1 - (1 - exp(-lam/(y-mu)^2))^alpha, y > mu."""

    alpha: float = 1.0
    lam: float = 1.0
    mu: float = 0.0
    key: ClassVar[str] = "generalized-inverse-rayleigh"
    real_params: ClassVar[tuple[str, ...]] = ("mu",)

    @property
    def support(self):
        return (self.mu, math.inf)

    def _log_k(self, y):
        # k = 1 - exp(-lam/(y-mu)^2)
        return _log1mexp(-self.lam / (y - self.mu) ** 2)

    def _log_cdf(self, y):
        return _log1mexp(self.alpha * self._log_k(y))

    def _log_pdf(self, y):
        z = y - self.mu
        return (
            math.log(2 * self.alpha * self.lam)
            - 3 * np.log(z)
            - self.lam / z**2
            + (self.alpha - 1) * self._log_k(y)
        )

    def _quantile(self, u):
        k = (1 - u) ** (1 / self.alpha)
        return self.mu + np.sqrt(-self.lam / np.log1p(-k))


@dataclass(frozen=True)
class GeneralizedRayleigh(BaselineDistribution):
    """F0(y) = (1 - exp(-(lam*y)^2))^alpha, y > 0."""

    alpha: float = 1.0
    lam: float = 1.0
    key: ClassVar[str] = "generalized-rayleigh"

    def _log_cdf(self, y):
        return self.alpha * _log1mexp(-((self.lam * y) ** 2))

    def _log_pdf(self, y):
        s = (self.lam * y) ** 2
        return (
            math.log(2 * self.alpha * self.lam**2)
            + np.log(y)
            - s
            + (self.alpha - 1) * _log1mexp(-s)
        )

    def _quantile(self, u):
        return np.sqrt(-np.log1p(-(u ** (1 / self.alpha)))) / self.lam


@dataclass(frozen=True)
class InverseExponential(BaselineDistribution):
    """F0(y) = exp(-lam/y), y > 0."""

    lam: float = 1.0
    key: ClassVar[str] = "inverse-exponential"

    def _log_cdf(self, y):
        return -self.lam / y

    def _log_pdf(self, y):
        return math.log(self.lam) - 2 * np.log(y) - self.lam / y

    def _quantile(self, u):
        return -self.lam / np.log(u)


@dataclass(frozen=True)
class BurrIII(BaselineDistribution):
    """F0(y) = 1/(1 + y^-c), y > 0."""

    c: float = 1.0
    key: ClassVar[str] = "burr-iii"

    def _log_cdf(self, y):
        # -log(1 + y^-c), written to avoid overflow of y^-c near zero
        ly = -self.c * np.log(y)
        return -np.logaddexp(0.0, ly)

    def _log_pdf(self, y):
        ly = -self.c * np.log(y)
        return math.log(self.c) + ly - np.log(y) - 2 * np.logaddexp(0.0, ly)

    def _quantile(self, u):
        return (1 / u - 1) ** (-1 / self.c)


@dataclass(frozen=True)
class InverseWeibull(BaselineDistribution):
    """F0(y) = exp(-y^-alpha), y > 0."""

    alpha: float = 1.0
    key: ClassVar[str] = "inverse-weibull"

    def _log_cdf(self, y):
        return -(y ** -self.alpha)

    def _log_pdf(self, y):
        return math.log(self.alpha) - (self.alpha + 1) * np.log(y) - y ** -self.alpha

    def _quantile(self, u):
        return (-np.log(u)) ** (-1 / self.alpha)


FAMILIES: dict[str, type[BaselineDistribution]] = {
    cls.key: cls
    for cls in (
        ExponentiatedGumbel,
        GeneralizedExponential,
        GeneralizedInverseRayleigh,
        GeneralizedRayleigh,
        InverseExponential,
        BurrIII,
        InverseWeibull,
    )
}


def make_baseline(family: str, **params: float) -> BaselineDistribution:
    """Build a baseline from its key and named parameters (defaults fill the rest)."""
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise BaselineError(
            f"unknown baseline {family!r}; choose one of {', '.join(sorted(FAMILIES))}"
        ) from None
    unknown = set(params) - set(cls.param_names())
    if unknown:
        raise BaselineError(f"{family}: unknown parameter(s) {sorted(unknown)}; expected {cls.param_names()}")
    return cls(**{k: float(v) for k, v in params.items()})


def parse_param_pairs(pairs) -> dict[str, float]:
    """Parse ``["alpha=1.3", "lam=2"]`` into a dict."""
    out = {}
    for item in pairs or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise BaselineError(f"expected name=value, got {item!r}")
        out[name.strip()] = float(value)
    return out


def baseline_from_dict(d: dict) -> BaselineDistribution:
    return make_baseline(d["family"], **d.get("params", {}))
