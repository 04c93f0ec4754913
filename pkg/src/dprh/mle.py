"""Maximum likelihood fitting, observed information and Wald intervals."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize, special, stats

from .baselines import FAMILIES, BaselineDistribution, make_baseline
from .likelihood import CensoredData, DataError, as_data, censored_log_likelihood, complete_mle_closed_form
from .model import EPS_CASE, THETA_NAMES, DprhParams, ModelError

log = logging.getLogger(__name__)


class FitError(RuntimeError):
    """Fitting could not start or produced an unusable result."""


class InformationError(FitError):
    """Observed information matrix is singular or ill-conditioned."""


# ------------------------------------------------------------ parameter map

@dataclass(frozen=True)
class ModelSpec:
    """Which DPRH parameters are free, tied together, or held fixed.

    ``tie_theta`` sets theta1 = theta2 (free name ``theta``), ``tie_theta_prime``
    sets theta1' = theta2' (``theta_prime``) and ``independence`` sets
    theta_i' = theta_i. ``fixed`` maps free or raw parameter names to values.
    """

    family: str
    tie_theta: bool = False
    tie_theta_prime: bool = False
    independence: bool = False
    fixed: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise FitError(f"unknown baseline family {self.family!r}")
        object.__setattr__(self, "fixed", dict(self.fixed))
        known = {n for n, _ in self.groups()} | set(self.raw_names)
        bad = set(self.fixed) - known
        if bad:
            raise FitError(f"cannot fix unknown parameter(s) {sorted(bad)}")

    @property
    def baseline_names(self) -> tuple[str, ...]:
        return FAMILIES[self.family].param_names()

    @property
    def raw_names(self) -> tuple[str, ...]:
        return THETA_NAMES + self.baseline_names

    def groups(self) -> list[tuple[str, tuple[str, ...]]]:
        if self.independence and self.tie_theta:
            g = [("theta", THETA_NAMES)]
        elif self.independence:
            g = [("theta1", ("theta1", "theta1p")), ("theta2", ("theta2", "theta2p"))]
        else:
            g = [("theta", ("theta1", "theta2"))] if self.tie_theta else [("theta1", ("theta1",)), ("theta2", ("theta2",))]
            if self.tie_theta_prime:
                g.append(("theta_prime", ("theta1p", "theta2p")))
            else:
                g += [("theta1p", ("theta1p",)), ("theta2p", ("theta2p",))]
        return g + [(n, (n,)) for n in self.baseline_names]

    def _group_fixed(self, name, members):
        for key in (name, *members):
            if key in self.fixed:
                return self.fixed[key]
        return None

    @property
    def free_names(self) -> tuple[str, ...]:
        return tuple(n for n, m in self.groups() if self._group_fixed(n, m) is None)

    @property
    def n_free(self) -> int:
        return len(self.free_names)

    def positive_mask(self) -> np.ndarray:
        real = FAMILIES[self.family].real_params
        return np.array([n not in real for n in self.free_names])

    def unpack(self, x: Sequence[float]) -> DprhParams:
        values = dict(zip(self.free_names, map(float, x)))
        raw = {}
        for name, members in self.groups():
            v = values.get(name)
            if v is None:
                v = self._group_fixed(name, members)
            for m in members:
                raw[m] = v
        base = make_baseline(self.family, **{n: raw[n] for n in self.baseline_names})
        return DprhParams(*(raw[n] for n in THETA_NAMES), baseline=base)

    def pack(self, params: DprhParams) -> np.ndarray:
        raw = params.as_dict()
        out = []
        for name, members in self.groups():
            if name in self.free_names:
                out.append(float(np.mean([raw[m] for m in members])))
        return np.array(out)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "tie_theta": self.tie_theta,
            "tie_theta_prime": self.tie_theta_prime,
            "independence": self.independence,
            "fixed": dict(self.fixed),
        }


# ---------------------------------------------------------------- results

@dataclass
class FitResult:
    spec: ModelSpec
    params_hat: DprhParams
    free_names: tuple[str, ...]
    estimate: np.ndarray
    loglik: float
    dispersion: np.ndarray | None
    ci: dict[str, tuple[float, float]]
    alpha: float
    aic: float
    converged: bool
    iterations: int
    grad_norm: float = math.nan
    warnings: list[str] = field(default_factory=list)

    @property
    def se(self) -> dict[str, float]:
        if self.dispersion is None:
            return {n: math.nan for n in self.free_names}
        d = np.diag(self.dispersion)
        return {n: math.sqrt(v) if v >= 0 else math.nan for n, v in zip(self.free_names, d)}

    @property
    def estimates(self) -> dict[str, float]:
        return dict(zip(self.free_names, map(float, self.estimate)))

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "estimates": self.estimates,
            "params": self.params_hat.as_dict(),
            "standard_errors": self.se,
            "ci": {k: list(v) for k, v in self.ci.items()},
            "ci_level": 1 - self.alpha,
            "dispersion": None if self.dispersion is None else self.dispersion.tolist(),
            "loglik": self.loglik,
            "aic": self.aic,
            "converged": self.converged,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "warnings": list(self.warnings),
        }

    def table(self) -> str:
        level = f"{100 * (1 - self.alpha):g}%"
        lines = [f"{'parameter':<12}{'estimate':>12}{'std.err':>12}{'LCL':>12}{'UCL':>12}   ({level} Wald)"]
        se = self.se
        for n, v in self.estimates.items():
            lo, hi = self.ci.get(n, (math.nan, math.nan))
            lines.append(f"{n:<12}{v:>12.4f}{se[n]:>12.4f}{lo:>12.4f}{hi:>12.4f}")
        lines.append(f"loglik = {self.loglik:.4f}   AIC = {self.aic:.2f}   converged = {self.converged}")
        return "\n".join(lines)


# --------------------------------------------------------- numerics

def z_quantile(alpha: float) -> float:
    """Upper alpha/2 point of the standard normal."""
    return float(-special.ndtri(alpha / 2))


def hessian_steps(x: np.ndarray) -> np.ndarray:
    return np.maximum(1e-5, 1e-4 * np.abs(x))


def numerical_hessian(f, x, steps=None) -> np.ndarray:
    """Central-difference Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    h = hessian_steps(x) if steps is None else np.asarray(steps, dtype=float)
    k = len(x)
    f0 = f(x)
    H = np.empty((k, k))
    E = np.diag(h)
    for i in range(k):
        H[i, i] = (f(x + E[i]) - 2 * f0 + f(x - E[i])) / h[i] ** 2
        for j in range(i):
            v = (f(x + E[i] + E[j]) - f(x + E[i] - E[j]) - f(x - E[i] + E[j]) + f(x - E[i] - E[j])) / (
                4 * h[i] * h[j]
            )
            H[i, j] = H[j, i] = v
    return (H + H.T) / 2


def observed_information(loglik, x, steps=None) -> np.ndarray:
    """Negative Hessian of ``loglik`` at ``x`` (original parameter scale)."""
    V = -numerical_hessian(loglik, x, steps)
    if not np.all(np.isfinite(V)):
        raise InformationError("observed information has non-finite entries")
    return V


def invert_information(V: np.ndarray, names=None) -> tuple[np.ndarray, list[str]]:
    notes = []
    diag = np.diag(V)
    if np.any(diag <= 0):
        bad = [names[i] if names else str(i) for i in np.flatnonzero(diag <= 0)]
        notes.append(f"observed information has non-positive diagonal for {bad}")
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > 1e12:
        raise InformationError(f"observed information is singular (condition number {cond:.3g})")
    S = np.linalg.inv(V)
    return (S + S.T) / 2, notes


def asymptotic_ci(estimate, dispersion, alpha: float = 0.05, names=None) -> dict[str, tuple[float, float]]:
    """Wald intervals estimate +/- z_{alpha/2} sqrt(var)."""
    estimate = np.atleast_1d(np.asarray(estimate, dtype=float))
    names = list(names) if names is not None else [str(i) for i in range(len(estimate))]
    var = np.diag(np.atleast_2d(dispersion))
    z = z_quantile(alpha)
    out = {}
    for n, est, v in zip(names, estimate, var):
        if v < 0:
            raise InformationError(f"negative variance estimate for {n}: {v:g}")
        s = math.sqrt(v)
        out[n] = (float(est - z * s), float(est + z * s))
    return out


# ------------------------------------------------------------- fitting

def default_baseline(family: str, data: CensoredData) -> BaselineDistribution:
    """Rough data-scaled starting baseline."""
    t = np.concatenate([data.t1, data.t2])
    med = float(np.median(t))
    sd = float(np.std(t)) or 1.0
    ln2 = math.log(2)
    if family == "exponentiated-gumbel":
        return make_baseline(family, lam=math.pi / (sd * math.sqrt(6)))
    if family == "generalized-exponential":
        return make_baseline(family, lam=1 / max(float(np.mean(t)), 1e-12))
    if family == "generalized-rayleigh":
        return make_baseline(family, alpha=1.0, lam=math.sqrt(ln2) / med)
    if family == "inverse-exponential":
        return make_baseline(family, lam=med * ln2)
    if family == "generalized-inverse-rayleigh":
        mu = 0.0 if t.min() > 0 else float(t.min()) - sd
        return make_baseline(family, alpha=1.0, lam=ln2 * (med - mu) ** 2, mu=mu)
    return make_baseline(family)


def default_init(data: CensoredData, spec: ModelSpec, baseline: BaselineDistribution | None = None) -> DprhParams:
    """Starting point: data-scaled baseline plus closed-form thetas on the raw values."""
    data = as_data(data)
    base = baseline if baseline is not None else default_baseline(spec.family, data)
    keep = data.t1 != data.t2
    try:
        th = complete_mle_closed_form(np.column_stack([data.t1[keep], data.t2[keep]]), base)
        if not all(np.isfinite(th)) or min(th) <= 0:
            raise DataError("bad closed form")
    except (DataError, ValueError):
        th = (1.0, 1.0, 1.0, 1.0)
    raw = dict(zip(THETA_NAMES, th), **base.params)
    for name, members in spec.groups():
        fixed = spec._group_fixed(name, members)
        v = fixed if fixed is not None else float(np.mean([raw[m] for m in members]))
        for m in members:
            raw[m] = v
    return DprhParams(*(raw[n] for n in THETA_NAMES), baseline=make_baseline(spec.family, **{n: raw[n] for n in spec.baseline_names}))


def _loglik_free(spec: ModelSpec, data: CensoredData):
    def f(x):
        try:
            return censored_log_likelihood(spec.unpack(x), data)
        except (ValueError, ModelError):
            return -math.inf
    return f


def fit_mle(
    data,
    spec: ModelSpec,
    init: DprhParams | Mapping[str, float] | None = None,
    *,
    starts: int = 5,
    seed: int | None = 0,
    alpha: float = 0.05,
    refine: bool = True,
    maxiter: int = 20000,
    extra_starts: Sequence[Sequence[float]] = (),
    information: bool = True,
) -> FitResult:
    """Maximize the censored log-likelihood over the free parameters of ``spec``.

    The search runs in log scale for positive parameters: a Nelder-Mead pass per
    start (the first start is ``init``, the others jitter it), then a BFGS polish
    of the best point. The dispersion matrix is the inverse observed information
    on the original scale.
    """
    data = as_data(data)
    if len(data) < 5:
        raise FitError(f"need at least 5 observations, got {len(data)}")
    if init is None:
        x0 = spec.pack(default_init(data, spec))
    elif isinstance(init, DprhParams):
        x0 = spec.pack(init)
    else:
        x0 = np.array([float(init[n]) for n in spec.free_names])
    pos = spec.positive_mask()
    if np.any(x0[pos] <= 0):
        raise FitError("initial values must be positive for positivity-constrained parameters")
    loglik = _loglik_free(spec, data)
    if not np.isfinite(loglik(x0)):
        raise FitError(f"log-likelihood is not finite at the initial point {dict(zip(spec.free_names, x0))}")

    to_z = lambda x: np.where(pos, np.log(np.where(pos, x, 1.0)), x)  # noqa: E731
    to_x = lambda z: np.where(pos, np.exp(np.where(pos, z, 0.0)), z)  # noqa: E731

    def nll(z):
        v = loglik(to_x(z))
        return -v if np.isfinite(v) else 1e300

    rng = np.random.default_rng(seed)
    z_starts = [to_z(x0)] + [to_z(np.asarray(s, float)) for s in extra_starts]
    for _ in range(max(starts, 1) - 1):
        jitter = rng.normal(0.0, 0.3, size=len(x0))
        z_starts.append(to_z(x0) + np.where(pos, jitter, jitter * np.maximum(np.abs(x0), 1.0) * 0.1))

    best, iterations = None, 0
    opts = {"xatol": 1e-9, "fatol": 1e-11, "maxiter": maxiter, "maxfev": 2 * maxiter, "adaptive": len(x0) > 3}
    for z in z_starts:
        if nll(z) >= 1e300:
            continue
        res = optimize.minimize(nll, z, method="Nelder-Mead", options=opts)
        iterations += res.nit
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise FitError("no start gave a finite log-likelihood")
    nm_ok = bool(best.success)
    z_best, f_best = best.x, best.fun
    if refine:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = optimize.minimize(nll, z_best, method="BFGS", options={"gtol": 1e-9, "maxiter": 500})
        iterations += res.nit
        if res.fun <= f_best:
            z_best, f_best = res.x, res.fun
        # a second simplex pass from the polished point settles any BFGS stall
        res = optimize.minimize(nll, z_best, method="Nelder-Mead", options=opts)
        iterations += res.nit
        if res.fun < f_best:
            z_best, f_best = res.x, res.fun

    x_hat = to_x(z_best)
    ll = -f_best
    g = optimize.approx_fprime(z_best, nll, 1e-6)
    gnorm = float(np.linalg.norm(g))
    converged = nm_ok and np.isfinite(ll) and gnorm <= 1e-3 * max(1.0, abs(ll))
    notes = []
    if not converged:
        notes.append(f"optimizer did not meet convergence thresholds (grad norm {gnorm:.3g})")
    params_hat = spec.unpack(x_hat)
    T = params_hat.total
    if min(abs(T - params_hat.theta1p), abs(T - params_hat.theta2p)) < 10 * EPS_CASE:
        notes.append("estimate lies on the degenerate manifold theta1 + theta2 = theta_i'")

    dispersion = None
    ci = {n: (math.nan, math.nan) for n in spec.free_names}
    if information:
        try:
            V = observed_information(loglik, x_hat)
            dispersion, more = invert_information(V, spec.free_names)
            notes += more
            ci = asymptotic_ci(x_hat, dispersion, alpha, spec.free_names)
        except InformationError as exc:
            notes.append(str(exc))
    for n in notes:
        log.warning(n)
    return FitResult(
        spec=spec,
        params_hat=params_hat,
        free_names=spec.free_names,
        estimate=x_hat,
        loglik=float(ll),
        dispersion=dispersion,
        ci=ci,
        alpha=alpha,
        aic=float(-2 * ll + 2 * spec.n_free),
        converged=bool(converged),
        iterations=int(iterations),
        grad_norm=gnorm,
        warnings=notes,
    )


@dataclass
class LRTResult:
    statistic: float
    dof: int
    p_value: float
    null_fit: FitResult
    alt_fit: FitResult

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "null": self.null_fit.to_dict(),
            "alternative": self.alt_fit.to_dict(),
        }


def likelihood_ratio_test(data, null_spec: ModelSpec, alt_spec: ModelSpec, **fit_kwargs) -> LRTResult:
    """2 (loglik_alt - loglik_null) against chi-square with the difference in free parameters."""
    null_fit = fit_mle(data, null_spec, **fit_kwargs)
    # start the larger model from the restricted optimum so nesting holds numerically
    kw = dict(fit_kwargs)
    kw.setdefault("init", None)
    alt_fit = fit_mle(data, alt_spec, extra_starts=[alt_spec.pack(null_fit.params_hat)], **kw)
    dof = alt_spec.n_free - null_spec.n_free
    if dof < 0:
        raise FitError("null model has more free parameters than the alternative")
    if alt_fit.loglik < null_fit.loglik - 1e-6:
        raise FitError(
            f"alternative log-likelihood {alt_fit.loglik:.6f} is below the null's {null_fit.loglik:.6f}; "
            "models are not nested or the optimizer failed"
        )
    stat = max(0.0, 2 * (alt_fit.loglik - null_fit.loglik))
    p = 1.0 if dof == 0 else float(stats.chi2.sf(stat, dof))
    return LRTResult(float(stat), dof, p, null_fit, alt_fit)
