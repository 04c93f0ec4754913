"""Monte Carlo harness: bias, MSE and interval coverage of the estimators."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .baselines import InverseWeibull
from .bayes import PriorSpec, SamplerError, credible_interval, posterior_mode, sample_posterior
from .mle import FitError, ModelSpec, fit_mle
from .model import DprhParams
from .sampling import SamplingError, generate_sample

log = logging.getLogger(__name__)

ESTIMATORS = ("mle_theta_known", "mle", "bayes_gamma", "bayes_normal")


@dataclass(frozen=True)
class StudyConfig:
    """One cell of a simulation table.

    ``theta`` is the common theta1 = theta2 used to generate data; the fitted
    model ties them as well. ``bayes_*`` estimators centre their priors on the
    replicate's own MLE.
    """

    theta: float
    theta1p: float
    theta2p: float
    alpha: float
    n: int
    r: int
    estimator: str = "mle"
    p: float = 0.10
    seed: int = 0
    ci_alpha: float = 0.05
    starts: int = 1
    mcmc_steps: int = 3000
    gamma_var: float = 1.2
    normal_sigma: float = 0.1

    def __post_init__(self):
        if self.r < 2:
            raise ValueError("a study needs r >= 2 replicates")
        if self.n < 5:
            raise ValueError("a study needs n >= 5")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if not 0 <= self.p < 1:
            raise ValueError("censoring proportion must be in [0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def true_params(self) -> DprhParams:
        return DprhParams(self.theta, self.theta, self.theta1p, self.theta2p, InverseWeibull(self.alpha))

    @property
    def spec(self) -> ModelSpec:
        fixed = {"theta": self.theta} if self.estimator == "mle_theta_known" else {}
        return ModelSpec("inverse-weibull", tie_theta=True, fixed=fixed)

    def truth_vector(self) -> np.ndarray:
        return self.spec.pack(self.true_params)


@dataclass
class StudyReport:
    config: StudyConfig
    names: tuple[str, ...]
    estimates: np.ndarray  # (r_eff, k)
    covered: np.ndarray  # (r_eff, k) bool
    failures: int

    @property
    def r_effective(self) -> int:
        return int(len(self.estimates))

    @property
    def truth(self) -> np.ndarray:
        return self.config.truth_vector()

    @property
    def mean(self) -> np.ndarray:
        return self.estimates.mean(axis=0)

    @property
    def bias(self) -> np.ndarray:
        return (self.estimates - self.truth).mean(axis=0)

    @property
    def mse(self) -> np.ndarray:
        return ((self.estimates - self.truth) ** 2).mean(axis=0)

    @property
    def coverage(self) -> np.ndarray:
        return self.covered.mean(axis=0)

    @property
    def unreliable(self) -> bool:
        return self.failures > 0.1 * self.config.r

    def to_dict(self) -> dict:
        per = {}
        for j, n in enumerate(self.names):
            per[n] = {
                "true": float(self.truth[j]),
                "estimate": float(self.mean[j]),
                "bias": float(self.bias[j]),
                "mse": float(self.mse[j]),
                "coverage": float(self.coverage[j]),
            }
        return {
            "config": self.config.to_dict(),
            "parameters": per,
            "r_effective": self.r_effective,
            "failures": self.failures,
            "unreliable": self.unreliable,
        }

    def table(self) -> str:
        head = f"n={self.config.n}  estimator={self.config.estimator}  r={self.r_effective}/{self.config.r}"
        if self.unreliable:
            head += "  [UNRELIABLE: >10% failures]"
        rows = [head, f"{'':<16}" + "".join(f"{n:>12}" for n in self.names)]
        for label, v in (("Estimates", self.mean), ("Bias", self.bias), ("MSE", self.mse), ("Cov. Probability", self.coverage)):
            rows.append(f"{label:<16}" + "".join(f"{x:>12.4f}" for x in v))
        return "\n".join(rows)


def _replicate(cfg: StudyConfig, seed_seq: np.random.SeedSequence):
    """Estimate and interval-coverage flags for one replicate; None on failure."""
    data_seed, fit_seed, chain_seed = (int(s.generate_state(1)[0]) for s in seed_seq.spawn(3))
    data = generate_sample(cfg.theta, cfg.theta1p, cfg.theta2p, cfg.alpha, cfg.n, cfg.p, seed=data_seed)
    spec = cfg.spec
    truth = cfg.truth_vector()
    fit = fit_mle(data, spec, init=cfg.true_params, starts=cfg.starts, seed=fit_seed, alpha=cfg.ci_alpha)
    if cfg.estimator.startswith("mle"):
        lo = np.array([fit.ci[n][0] for n in spec.free_names])
        hi = np.array([fit.ci[n][1] for n in spec.free_names])
        return fit.estimate, (lo <= truth) & (truth <= hi)
    if cfg.estimator == "bayes_gamma":
        prior = PriorSpec.gamma_centered(spec.free_names, fit.estimate, cfg.gamma_var)
    else:
        prior = PriorSpec.normal_centered(spec.free_names, fit.estimate, cfg.normal_sigma)
    se = np.array([fit.se[n] for n in spec.free_names])
    scales = np.where(np.isfinite(se) & (se > 0), se, 0.1 * fit.estimate)
    chain = sample_posterior(data, spec, prior, fit.estimate, cfg.mcmc_steps, chain_seed, scales=scales)
    est = posterior_mode(chain)
    ci = np.array([credible_interval(chain, j, cfg.ci_alpha) for j in range(len(est))])
    return est, (ci[:, 0] <= truth) & (truth <= ci[:, 1])


def _safe_replicate(args):
    cfg, ss, i, fn = args
    try:
        est, cov = fn(cfg, ss)
        if not np.all(np.isfinite(est)):
            raise FitError("non-finite estimate")
        return i, est, cov
    except (FitError, SamplerError, SamplingError, ValueError) as exc:
        log.warning("replicate %d failed: %s", i, exc)
        return i, None, None


def run_study(cfg: StudyConfig, threads: int = 1, replicate=None) -> StudyReport:
    """Run ``cfg.r`` replicates and aggregate; results do not depend on ``threads``.

    ``replicate(cfg, seed_sequence) -> (estimate, covered)`` replaces the built-in
    estimator; it must be picklable when ``threads > 1``.
    """
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.r)
    fn = replicate or _replicate
    jobs = [(cfg, ss, i, fn) for i, ss in enumerate(children)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_safe_replicate, jobs, chunksize=max(1, cfg.r // (4 * threads))))
    else:
        results = [_safe_replicate(j) for j in jobs]
    results.sort(key=lambda t: t[0])
    ok = [(e, c) for _, e, c in results if e is not None]
    k = cfg.spec.n_free
    est = np.array([e for e, _ in ok]).reshape(-1, k)
    cov = np.array([c for _, c in ok], dtype=bool).reshape(-1, k)
    report = StudyReport(cfg, cfg.spec.free_names, est, cov, failures=cfg.r - len(ok))
    if report.unreliable:
        log.warning("study marked unreliable: %d of %d replicates failed", report.failures, cfg.r)
    return report


def load_study_configs(path) -> list[StudyConfig]:
    """A JSON file holding one config object or a list of them."""
    with open(path) as fh:
        raw = json.load(fh)
    raw = raw.get("studies", raw) if isinstance(raw, dict) else raw
    if isinstance(raw, dict):
        raw = [raw]
    return [StudyConfig.from_dict(d) for d in raw]
