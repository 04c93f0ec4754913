"""Bayesian inference: priors, random-walk Metropolis-Hastings, summaries, bootstrap."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import special, stats

from .likelihood import CensoredData, as_data, censored_log_likelihood
from .mle import FitError, ModelSpec

log = logging.getLogger(__name__)


class SamplerError(RuntimeError):
    """The chain could not be run or summarized."""


# ------------------------------------------------------------------ priors

@dataclass(frozen=True)
class GammaPrior:
    """Gamma with density rate^shape x^(shape-1) e^(-rate x) / Gamma(shape)."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError(f"Gamma prior needs positive shape and rate, got {self.shape}, {self.rate}")

    @classmethod
    def from_moments(cls, mean: float, var: float) -> "GammaPrior":
        if mean <= 0 or var <= 0:
            raise ValueError("Gamma moment matching needs positive mean and variance")
        return cls(shape=mean**2 / var, rate=mean / var)

    def logpdf(self, x: float) -> float:
        if x <= 0:
            return -math.inf
        a, b = self.shape, self.rate
        return a * math.log(b) - special.gammaln(a) + (a - 1) * math.log(x) - b * x

    def to_dict(self):
        return {"family": "gamma", "shape": self.shape, "rate": self.rate}


@dataclass(frozen=True)
class NormalPrior:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"Normal prior needs positive sigma, got {self.sigma}")

    def logpdf(self, x: float) -> float:
        z = (x - self.mu) / self.sigma
        return -0.5 * z * z - math.log(self.sigma) - 0.5 * math.log(2 * math.pi)

    def to_dict(self):
        return {"family": "normal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class FlatPrior:
    """Improper constant prior; contributes nothing to the log posterior."""

    def logpdf(self, x: float) -> float:
        return 0.0

    def to_dict(self):
        return {"family": "flat"}


def prior_from_dict(d: Mapping) -> GammaPrior | NormalPrior | FlatPrior:
    fam = d.get("family", "flat")
    if fam == "gamma":
        if "mean" in d:
            return GammaPrior.from_moments(float(d["mean"]), float(d.get("var", 1.2)))
        return GammaPrior(float(d["shape"]), float(d["rate"]))
    if fam == "normal":
        return NormalPrior(float(d["mu"]), float(d["sigma"]))
    if fam == "flat":
        return FlatPrior()
    raise ValueError(f"unknown prior family {fam!r}")


@dataclass(frozen=True)
class PriorSpec:
    """Independent priors on the free parameters of a model; missing names get a flat prior."""

    priors: Mapping[str, GammaPrior | NormalPrior | FlatPrior] = field(default_factory=dict)

    def log_density(self, names: Sequence[str], x: Sequence[float]) -> float:
        total = 0.0
        for n, v in zip(names, x):
            total += self.priors.get(n, FlatPrior()).logpdf(float(v))
            if total == -math.inf:
                return total
        return total

    @classmethod
    def gamma_centered(cls, names, centers, var: float = 1.2) -> "PriorSpec":
        return cls({n: GammaPrior.from_moments(float(c), var) for n, c in zip(names, centers)})

    @classmethod
    def normal_centered(cls, names, centers, sigma: float = 0.1) -> "PriorSpec":
        return cls({n: NormalPrior(float(c), sigma) for n, c in zip(names, centers)})

    def to_dict(self):
        return {n: p.to_dict() for n, p in self.priors.items()}


def log_posterior(x, data: CensoredData, spec: ModelSpec, prior: PriorSpec) -> float:
    """Unnormalized log posterior of the free-parameter vector ``x``."""
    lp = prior.log_density(spec.free_names, x)
    if lp == -math.inf:
        return lp
    pos = spec.positive_mask()
    if np.any(np.asarray(x)[pos] <= 0):
        return -math.inf
    try:
        return censored_log_likelihood(spec.unpack(x), data) + lp
    except ValueError:
        return -math.inf


# ------------------------------------------------------------------ chains

@dataclass
class PosteriorChain:
    names: tuple[str, ...]
    draws: np.ndarray  # all stored steps, shape (n_steps, k)
    log_posts: np.ndarray
    accepted: np.ndarray
    burn_in: int
    thin: int
    proposal_scales: np.ndarray
    seed: int | None = None

    @property
    def kept(self) -> np.ndarray:
        return self.draws[self.burn_in :: self.thin]

    @property
    def acceptance_rate(self) -> float:
        a = self.accepted[self.burn_in :]
        return float(a.mean()) if len(a) else math.nan

    def column(self, name_or_index) -> np.ndarray:
        j = self.names.index(name_or_index) if isinstance(name_or_index, str) else int(name_or_index)
        return self.kept[:, j]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", *self.names, "log_post", "accepted"])
        for i, (row, lp, acc) in enumerate(zip(self.draws, self.log_posts, self.accepted)):
            w.writerow([i, *(repr(float(v)) for v in row), repr(float(lp)), int(acc)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def summary(self, alpha: float = 0.05) -> dict:
        modes = posterior_mode(self) if len(self.kept) >= MIN_MODE_DRAWS else [math.nan] * len(self.names)
        out = {}
        for j, n in enumerate(self.names):
            col = self.kept[:, j]
            lo, hi = credible_interval(self, j, alpha)
            out[n] = {
                "mean": float(col.mean()),
                "sd": float(col.std(ddof=1)),
                "mode": float(modes[j]),
                "ci": [lo, hi],
            }
        return {
            "parameters": out,
            "ci_level": 1 - alpha,
            "acceptance_rate": self.acceptance_rate,
            "n_steps": int(len(self.draws)),
            "burn_in": self.burn_in,
            "thin": self.thin,
            "n_kept": int(len(self.kept)),
            "proposal_scales": dict(zip(self.names, map(float, self.proposal_scales))),
        }


def mh_sample(
    log_target: Callable[[np.ndarray], float],
    init: Sequence[float],
    n_steps: int,
    seed: int | None = 0,
    *,
    scales: Sequence[float] | None = None,
    burn_in: int | None = None,
    thin: int = 1,
    target_accept: float = 0.3,
    max_stuck: int = 10_000,
    names: Sequence[str] | None = None,
) -> PosteriorChain:
    """Random-walk Metropolis with independent Normal increments per coordinate.

    During burn-in a Robbins-Monro recursion moves a common log scale factor
    toward ``target_accept``; afterwards the scales are frozen so the kept draws
    come from a fixed Markov kernel.
    """
    x = np.array(init, dtype=float)
    k = len(x)
    if n_steps < 1:
        raise SamplerError("n_steps must be positive")
    if thin < 1:
        raise SamplerError("thin must be >= 1")
    burn = int(0.2 * n_steps) if burn_in is None else int(burn_in)
    if not 0 <= burn < n_steps:
        raise SamplerError(f"burn_in {burn} must be in [0, n_steps)")
    base = np.asarray(scales, float) if scales is not None else 0.1 * np.maximum(np.abs(x), 1e-3)
    if base.shape != (k,) or np.any(base <= 0):
        raise SamplerError("proposal scales must be positive, one per parameter")
    lp = log_target(x)
    if not np.isfinite(lp):
        raise SamplerError(f"log target is not finite at the initial point {x.tolist()}")

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n_steps, k))
    logu = np.log(rng.random(n_steps))
    draws = np.empty((n_steps, k))
    lps = np.empty(n_steps)
    acc = np.zeros(n_steps, dtype=bool)
    log_factor = 0.0
    stuck = 0
    for i in range(n_steps):
        step = base * math.exp(log_factor)
        cand = x + step * noise[i]
        lp_c = log_target(cand)
        a = min(1.0, math.exp(min(0.0, lp_c - lp))) if np.isfinite(lp_c) else 0.0
        if logu[i] < lp_c - lp:
            x, lp = cand, lp_c
            acc[i] = True
            stuck = 0
        else:
            stuck += 1
            if stuck >= max_stuck:
                raise SamplerError(f"{max_stuck} consecutive rejections; proposal scale {step.tolist()} is too large")
        if i < burn:
            log_factor += (a - target_accept) / math.sqrt(i + 1)
        draws[i] = x
        lps[i] = lp
    return PosteriorChain(
        names=tuple(names) if names is not None else tuple(f"x{j}" for j in range(k)),
        draws=draws,
        log_posts=lps,
        accepted=acc,
        burn_in=burn,
        thin=thin,
        proposal_scales=base * math.exp(log_factor),
        seed=seed,
    )


def sample_posterior(
    data,
    spec: ModelSpec,
    prior: PriorSpec,
    init,
    n_steps: int = 5000,
    seed: int | None = 0,
    **kw,
) -> PosteriorChain:
    """MH chain over the free parameters of ``spec``; ``init`` is a vector or DprhParams."""
    data = as_data(data)
    x0 = spec.pack(init) if hasattr(init, "baseline") else np.asarray(init, float)
    return mh_sample(lambda x: log_posterior(x, data, spec, prior), x0, n_steps, seed, names=spec.free_names, **kw)


# --------------------------------------------------------------- summaries

MIN_MODE_DRAWS = 500


def _kde_mode(x: np.ndarray, grid_size: int = 512) -> float:
    x = np.asarray(x, float)
    lo, hi = float(x.min()), float(x.max())
    if hi - lo <= 0:
        return lo
    sd = x.std(ddof=1)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    spread = min(sd, iqr / 1.349) if iqr > 0 else sd
    h = 0.9 * spread * len(x) ** (-0.2)
    grid = np.linspace(lo, hi, grid_size)
    # bin the sample on a fine grid and convolve; exact enough and O(n)
    edges = np.linspace(lo, hi, 4097)
    counts, _ = np.histogram(x, edges)
    centers = 0.5 * (edges[1:] + edges[:-1])
    dens = np.zeros(grid_size)
    for start in range(0, grid_size, 64):
        g = grid[start : start + 64, None]
        dens[start : start + 64] = (counts * np.exp(-0.5 * ((g - centers) / h) ** 2)).sum(axis=1)
    return float(grid[int(np.argmax(dens))])


def posterior_mode(chain: PosteriorChain) -> np.ndarray:
    """Per-parameter marginal mode from a Gaussian KDE with Silverman bandwidth on a 512-point grid."""
    kept = chain.kept
    if len(kept) < MIN_MODE_DRAWS:
        raise SamplerError(f"posterior mode needs at least {MIN_MODE_DRAWS} kept draws, have {len(kept)}")
    return np.array([_kde_mode(kept[:, j]) for j in range(kept.shape[1])])


def credible_interval(chain: PosteriorChain, param, alpha: float = 0.05) -> tuple[float, float]:
    """Equal-tailed interval from empirical quantiles of the kept draws."""
    col = chain.column(param)
    if len(col) < 2:
        raise SamplerError("chain too short for a credible interval")
    lo, hi = np.quantile(col, [alpha / 2, 1 - alpha / 2])
    return float(lo), float(hi)


@dataclass
class BootstrapResult:
    names: tuple[str, ...]
    estimates: np.ndarray  # (B_eff, k)
    variance: np.ndarray
    se: np.ndarray
    b_requested: int
    dropped: int

    @property
    def b_effective(self) -> int:
        return int(len(self.estimates))

    def to_dict(self):
        return {
            "variance": dict(zip(self.names, map(float, self.variance))),
            "se": dict(zip(self.names, map(float, self.se))),
            "B": self.b_requested,
            "B_effective": self.b_effective,
            "dropped": self.dropped,
        }


def bootstrap_se(
    data,
    spec: ModelSpec,
    prior: PriorSpec,
    init,
    B: int,
    seed: int | None = 0,
    *,
    n_steps: int = 3000,
    estimator: Callable[[PosteriorChain], np.ndarray] = posterior_mode,
    **mh_kw,
) -> BootstrapResult:
    """Resample pairs with replacement and re-estimate with the MH posterior mode.

    Reports the between-replicate variance with divisor B - 1 and its square root.
    Replicates whose chain fails are dropped and counted.
    """
    if B < 2:
        raise SamplerError("bootstrap needs B >= 2")
    data = as_data(data)
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(B)
    ests, dropped = [], 0
    for child in children:
        rng = np.random.default_rng(child)
        idx = rng.integers(0, len(data), len(data))
        chain_seed = int(rng.integers(2**63))
        try:
            chain = sample_posterior(data.subset(idx), spec, prior, init, n_steps, chain_seed, **mh_kw)
            ests.append(estimator(chain))
        except (SamplerError, FitError) as exc:
            log.warning("bootstrap replicate dropped: %s", exc)
            dropped += 1
    if len(ests) < 2:
        raise SamplerError(f"only {len(ests)} bootstrap replicates succeeded")
    E = np.asarray(ests)
    var = E.var(axis=0, ddof=1)
    return BootstrapResult(tuple(spec.free_names), E, var, np.sqrt(var), B, dropped)


__all__ = [
    "BootstrapResult",
    "FlatPrior",
    "GammaPrior",
    "NormalPrior",
    "PosteriorChain",
    "PriorSpec",
    "SamplerError",
    "bootstrap_se",
    "credible_interval",
    "log_posterior",
    "mh_sample",
    "posterior_mode",
    "prior_from_dict",
    "sample_posterior",
]
