"""Command-line entry point: ``dprh <subcommand> ...``.

Exit status is 0 on success, 1 for usage or input errors and 2 for numerical
or convergence failures. Results go to stdout or ``-o``; diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import FAMILIES, BaselineError, InverseWeibull, make_baseline, parse_param_pairs
from .bayes import PriorSpec, SamplerError, bootstrap_se, posterior_mode, sample_posterior
from .likelihood import DataError, read_csv, write_csv
from .mle import FitError, ModelSpec, fit_mle
from .model import (
    DprhParams,
    ModelError,
    joint_cdf,
    joint_pdf,
    local_dependence_beta,
    marginal_cdf,
    marginal_pdf,
    reversed_hazard_vector,
)
from .sampling import SamplingError, generate_sample, generate_sample_general
from .studies import StudyConfig, load_study_configs, run_study
from .twins import (
    DEFAULT_B,
    TWIN_BASELINES,
    analyze,
    dependence_lrt,
    load_twin_csv,
    validation_report,
    write_probability_csv,
)

SCHEMA_VERSION = "1"
_BASELINE_HELP = "baseline family: " + ", ".join(sorted(FAMILIES)) + " (default %(default)s)"
log = logging.getLogger("dprh")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _clean(x):
    """Make results JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _config(args) -> dict:
    skip = {"func", "verbose", "output"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, result: dict, text: str | None = None) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "command": args.command, "config": _config(args), "result": result}
    if args.format == "text" and text is not None:
        out = text + "\n"
    else:
        out = json.dumps(_clean(doc), indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(out)
    else:
        sys.stdout.write(out)


def _params_from_args(args) -> DprhParams:
    theta1 = args.theta1 if args.theta1 is not None else args.theta
    theta2 = args.theta2 if args.theta2 is not None else args.theta
    if theta1 is None or theta2 is None:
        raise UsageError("give --theta or both --theta1 and --theta2")
    if args.theta1p is None or args.theta2p is None:
        raise UsageError("--theta1p and --theta2p are required")
    params = parse_param_pairs(args.param)
    if getattr(args, "alpha", None) is not None:
        params.setdefault("alpha", args.alpha)
    try:
        return DprhParams(theta1, theta2, args.theta1p, args.theta2p, make_baseline(args.baseline, **params))
    except (ModelError, BaselineError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _add_param_flags(p, baseline_default="inverse-weibull"):
    p.add_argument("--baseline", default=baseline_default, choices=sorted(FAMILIES), metavar="KEY", help=_BASELINE_HELP)
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE", help="baseline parameter (repeatable)")
    p.add_argument("--theta", type=float, help="common value of theta1 and theta2")
    p.add_argument("--theta1", type=float, help="theta1 (overrides --theta)")
    p.add_argument("--theta2", type=float, help="theta2 (overrides --theta)")
    p.add_argument("--theta1p", type=float, help="theta1'")
    p.add_argument("--theta2p", type=float, help="theta2'")
    p.add_argument("--alpha", type=float, help="shorthand for --param alpha=VALUE")


# ---------------------------------------------------------------- commands

def cmd_eval(args):
    p = _params_from_args(args)
    y1, y2 = args.y1, args.y2
    res = {
        "params": p.as_dict(),
        "family": p.baseline.key,
        "case": p.case_id(),
        "joint_cdf": float(joint_cdf(p, y1, y2)),
        "marginal_cdf": [float(marginal_cdf(p, 1, y1)), float(marginal_cdf(p, 2, y2))],
        "marginal_pdf": [float(marginal_pdf(p, 1, y1)), float(marginal_pdf(p, 2, y2))],
    }
    if y1 != y2:
        res["joint_pdf"] = float(joint_pdf(p, y1, y2))
        res["beta"] = float(local_dependence_beta(p, y1, y2))
        rh = reversed_hazard_vector(p, y1, y2)
        res["reversed_hazard"] = {"diagonal": rh.diagonal, "off_diagonal": rh.off_diagonal}
    _emit(args, res, _flat_text(res))


def _flat_text(d: dict, prefix: str = "") -> str:
    lines = []
    for k, v in d.items():
        if isinstance(v, dict):
            lines.append(_flat_text(v, f"{prefix}{k}."))
        elif isinstance(v, (list, tuple)):
            lines.append(f"{prefix + k:<28} " + "  ".join(f"{x:.10g}" for x in v))
        elif isinstance(v, float):
            lines.append(f"{prefix + k:<28} {v:.10g}")
        else:
            lines.append(f"{prefix + k:<28} {v}")
    return "\n".join(lines)


def cmd_simulate(args):
    p = _params_from_args(args)
    if isinstance(p.baseline, InverseWeibull) and p.theta1 == p.theta2:
        data = generate_sample(p.theta1, p.theta1p, p.theta2p, p.baseline.alpha, args.n, args.p, args.seed)
    else:
        data = generate_sample_general(p, args.n, args.p, args.seed)
    if args.output:
        write_csv(data, args.output)
    else:
        write_csv(data, sys.stdout)
    log.info("wrote %d pairs; censored fractions %s", len(data), data.censored_fraction)


def _spec_from_args(args) -> ModelSpec:
    fixed = {k: float(v) for k, v in parse_param_pairs(args.fix).items()}
    return ModelSpec(args.baseline, args.tie_theta, args.tie_theta_prime, args.independence, fixed)


def _init_from_args(args, spec):
    if not args.init:
        return None
    vals = parse_param_pairs(args.init)
    missing = set(spec.free_names) - set(vals)
    if missing:
        raise UsageError(f"--init must give every free parameter; missing {sorted(missing)}")
    return {n: vals[n] for n in spec.free_names}


def _add_model_flags(p):
    p.add_argument("--data", required=True, help="CSV with columns t1,d1,t2,d2")
    p.add_argument("--baseline", default="inverse-weibull", choices=sorted(FAMILIES), metavar="KEY", help=_BASELINE_HELP)
    p.add_argument("--tie-theta", action="store_true", help="theta1 = theta2")
    p.add_argument("--tie-theta-prime", action="store_true", help="theta1' = theta2'")
    p.add_argument("--independence", action="store_true", help="theta_i' = theta_i")
    p.add_argument("--fix", action="append", default=[], metavar="NAME=VALUE", help="hold a parameter fixed")
    p.add_argument("--init", action="append", default=[], metavar="NAME=VALUE", help="starting value of a free parameter")
    p.add_argument("--starts", type=int, default=5, help="optimizer starts")
    p.add_argument("--ci-alpha", type=float, default=0.05, help="1 - interval level")


def cmd_fit_mle(args):
    data = read_csv(args.data)
    spec = _spec_from_args(args)
    fit = fit_mle(data, spec, _init_from_args(args, spec), starts=args.starts, seed=args.seed, alpha=args.ci_alpha)
    for w in fit.warnings:
        log.warning(w)
    _emit(args, fit.to_dict(), fit.table())
    if not fit.converged:
        raise FitError("optimizer did not converge")


def cmd_fit_bayes(args):
    data = read_csv(args.data)
    spec = _spec_from_args(args)
    fit = fit_mle(data, spec, _init_from_args(args, spec), starts=args.starts, seed=args.seed, alpha=args.ci_alpha)
    names = spec.free_names
    if args.prior == "gamma":
        prior = PriorSpec.gamma_centered(names, fit.estimate, args.prior_var)
    elif args.prior == "normal":
        prior = PriorSpec.normal_centered(names, fit.estimate, args.prior_sigma)
    else:
        prior = PriorSpec()
    se = np.array([fit.se[n] for n in names])
    scales = np.where(np.isfinite(se) & (se > 0), se, 0.1 * np.maximum(np.abs(fit.estimate), 1e-3))
    chain = sample_posterior(
        data, spec, prior, fit.estimate, args.steps, args.seed, scales=scales, burn_in=args.burn_in, thin=args.thin
    )
    res = {"prior": prior.to_dict(), "mle": fit.estimates, "posterior": chain.summary(args.ci_alpha)}
    if args.bootstrap:
        bs = bootstrap_se(
            data, spec, prior, fit.estimate, args.bootstrap, args.seed, n_steps=args.steps, scales=scales, thin=args.thin
        )
        res["bootstrap"] = bs.to_dict()
    if args.chain_csv:
        chain.to_csv(args.chain_csv)
    lines = [f"{'parameter':<12}{'mode':>10}{'mean':>10}{'sd':>10}{'LCL':>10}{'UCL':>10}"]
    for n, s in res["posterior"]["parameters"].items():
        lines.append(f"{n:<12}{s['mode']:>10.4f}{s['mean']:>10.4f}{s['sd']:>10.4f}{s['ci'][0]:>10.4f}{s['ci'][1]:>10.4f}")
    lines.append(f"acceptance rate = {chain.acceptance_rate:.3f}")
    _emit(args, res, "\n".join(lines))


def cmd_study(args):
    if args.config:
        cfgs = load_study_configs(args.config)
    else:
        if None in (args.theta, args.theta1p, args.theta2p, args.alpha, args.n):
            raise UsageError("without --config give --theta --theta1p --theta2p --alpha --n")
        cfgs = [
            StudyConfig(
                args.theta, args.theta1p, args.theta2p, args.alpha, args.n, args.r, args.estimator, args.p, args.seed
            )
        ]
    reports = [run_study(c, threads=args.threads) for c in cfgs]
    for r in reports:
        if r.unreliable:
            log.warning("study n=%d %s unreliable (%d failures)", r.config.n, r.config.estimator, r.failures)
    _emit(args, {"studies": [r.to_dict() for r in reports]}, "\n\n".join(r.table() for r in reports))


def cmd_analyze_twins(args):
    load = load_twin_csv(args.data, None if args.category < 0 else args.category, args.b)
    log.info("loaded %d pairs (%d rows, %d simultaneous excluded)", len(load.records), load.n_rows, load.n_ties)
    families = args.baseline or list(TWIN_BASELINES)
    fits = {f: analyze(load.records, f, args.b, starts=args.starts, seed=args.seed) for f in families}
    ranking = sorted(fits, key=lambda f: fits[f].aic)
    best = fits[ranking[0]]
    res = {
        "n_pairs": len(load.records),
        "n_excluded_simultaneous": load.n_ties,
        "fits": {f: fits[f].to_dict() for f in families},
        "aic_ranking": ranking,
    }
    texts = [f"[{f}]\n{fits[f].table()}" for f in families]
    if args.lrt:
        lrt = dependence_lrt(load.records, ranking[0], args.b, starts=args.starts, seed=args.seed)
        res["lrt"] = {"family": ranking[0], "statistic": lrt.statistic, "dof": lrt.dof, "p_value": lrt.p_value}
        texts.append(f"LRT (theta = theta') chi2 = {lrt.statistic:.3f}, dof = {lrt.dof}, p = {lrt.p_value:.3g}")
    rep = validation_report(best.params_hat, load.records, args.threshold, args.b)
    res["validation"] = {k: v for k, v in rep.items() if k != "rows"}
    texts.append(f"validation consistency ({ranking[0]}, threshold {args.threshold}): {rep['fraction']:.3f}")
    if args.probs_csv:
        write_probability_csv(rep, args.probs_csv)
    if args.bayes:
        from .twins import to_censored_data, twin_spec

        spec = twin_spec(ranking[0])
        prior = PriorSpec.gamma_centered(spec.free_names, best.estimate, 1.2)
        se = np.array([best.se[n] for n in spec.free_names])
        scales = np.where(np.isfinite(se) & (se > 0), se, 0.05 * best.estimate)
        chain = sample_posterior(to_censored_data(load.records, args.b), spec, prior, best.estimate, args.steps, args.seed, scales=scales)
        res["bayes"] = chain.summary()
    _emit(args, res, "\n\n".join(texts))


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("-o", "--output", help="write the result here instead of stdout")
    common.add_argument("--format", choices=("json", "text"), default="json", help="JSON document or a readable table")
    common.add_argument("--threads", type=int, default=1, help="worker processes for parallel parts")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more diagnostics on stderr")

    parser = _Parser(prog="dprh", description="Bivariate dynamic proportional reversed hazards models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", parents=[common], help="evaluate CDF, pdf and dependence measures at a point")
    _add_param_flags(p)
    p.add_argument("--y1", type=float, required=True, help="first coordinate")
    p.add_argument("--y2", type=float, required=True, help="second coordinate")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", parents=[common], help="draw a left-censored sample (CSV)")
    _add_param_flags(p)
    p.add_argument("--n", type=int, required=True, help="number of pairs")
    p.add_argument("--p", type=float, default=0.0, help="censoring proportion per coordinate")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-mle", parents=[common], help="maximum likelihood fit")
    _add_model_flags(p)
    p.set_defaults(func=cmd_fit_mle)

    p = sub.add_parser("fit-bayes", parents=[common], help="Metropolis-Hastings posterior")
    _add_model_flags(p)
    p.add_argument("--prior", choices=("gamma", "normal", "flat"), default="gamma", help="priors centred at the MLE")
    p.add_argument("--prior-var", type=float, default=1.2, help="Gamma prior variance")
    p.add_argument("--prior-sigma", type=float, default=0.1, help="Normal prior sd")
    p.add_argument("--steps", type=int, default=10000, help="MH iterations including burn-in")
    p.add_argument("--burn-in", type=int, help="default: 20%% of steps")
    p.add_argument("--thin", type=int, default=1, help="keep every k-th post-burn-in draw")
    p.add_argument("--bootstrap", type=int, default=0, metavar="B", help="bootstrap replicates for SEs")
    p.add_argument("--chain-csv", help="write the full chain here")
    p.set_defaults(func=cmd_fit_bayes)

    p = sub.add_parser("study", parents=[common], help="Monte Carlo bias/MSE/coverage study (IW baseline)")
    p.add_argument("--config", help="JSON file with one config or a list")
    p.add_argument("--theta", type=float, help="true theta1 = theta2")
    p.add_argument("--theta1p", type=float, help="true theta1'")
    p.add_argument("--theta2p", type=float, help="true theta2'")
    p.add_argument("--alpha", type=float, help="true inverse Weibull shape")
    p.add_argument("--n", type=int, help="sample size")
    p.add_argument("--r", type=int, default=200, help="replicates")
    p.add_argument("--p", type=float, default=0.10, help="censoring proportion")
    p.add_argument(
        "--estimator", default="mle", choices=("mle_theta_known", "mle", "bayes_gamma", "bayes_normal"), help="estimator"
    )
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("analyze-twins", parents=[common], help="twin appendectomy analysis")
    p.add_argument("--data", required=True, help="CSV: pair_id,zygosity,sex,age1,status1,age2,status2")
    p.add_argument("--baseline", action="append", choices=sorted(FAMILIES), metavar="KEY", help="baseline key, repeatable (default: generalized-rayleigh, exponentiated-gumbel, generalized-exponential)")
    p.add_argument("--category", type=int, default=2, help="zygosity category (-1 keeps all)")
    p.add_argument("--b", type=float, default=DEFAULT_B, help="horizon age")
    p.add_argument("--threshold", type=float, default=0.5, help="validation probability threshold")
    p.add_argument("--starts", type=int, default=5, help="optimizer starts per baseline")
    p.add_argument("--lrt", action="store_true", help="test theta = theta'")
    p.add_argument("--bayes", action="store_true", help="also run the Gamma-prior MH chain")
    p.add_argument("--steps", type=int, default=10000, help="MH iterations for --bayes")
    p.add_argument("--probs-csv", help="per-pair conditional probabilities")
    p.set_defaults(func=cmd_analyze_twins)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    try:
        args.func(args)
    except (UsageError, DataError, BaselineError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"dprh {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (FitError, SamplerError, SamplingError, ModelError, ValueError, FloatingPointError) as exc:
        print(f"dprh {args.command}: numerical error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
