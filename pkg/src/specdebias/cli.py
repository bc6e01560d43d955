"""Command-line entry point: ``specdebias <subcommand> ...``."""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .debias import FEASIBILITY_TOL, debias, df_debias
from .designs import DesignRecipe, SignalRecipe
from .errors import DimensionMismatchError, InvalidInputError, SpectrumDebiasError
from .experiments import (ExperimentConfig, _bh_adjusted, read_config, run_alignment_study,
                          run_calibration, simulate_dataset)
from .fit import DEFAULT_MAX_ITER, DEFAULT_TOL, fit
from .inference import infer
from .pcr import debiased_pcr
from .penalty import PenaltySpec
from .spectral import decompose, sample_marchenko_pastur
from .vamp import solve_fixed_point


INT_COLUMNS = ("index", "component", "reject")


class _Parser(argparse.ArgumentParser):
    # argparse exits with its own message; route usage errors through the JSON channel
    def error(self, message):
        raise InvalidInputError(message)


def _penalty(text):
    return PenaltySpec.parse(text)


def _add_data(p):
    p.add_argument("--x", required=True, help="design matrix (CSV or binary)")
    p.add_argument("--y", required=True, help="response vector (CSV or binary)")
    p.add_argument("--header", action="store_true", help="CSV inputs carry a header row")


def _add_common(p, sigma=True):
    p.add_argument("--penalty", type=_penalty, default=PenaltySpec(1.0, 0.1),
                   help="en:L1,L2 | ridge:L2 | lasso:L1 (default en:1.0,0.1)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    if sigma:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--sigma2", type=float, default=None, help="known noise variance")
        g.add_argument("--estimate-sigma2", action="store_true",
                       help="estimate the noise variance from the data (default)")
        p.add_argument("--feasibility-tol", type=float, default=FEASIBILITY_TOL)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None, help="output file (default stdout)")


def build_parser():
    parser = _Parser(prog="specdebias", description="Spectrum-aware debiasing toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="penalised least squares fit")
    _add_data(p)
    _add_common(p, sigma=False)

    p = sub.add_parser("debias", help="fit and debias")
    _add_data(p)
    _add_common(p)
    p.add_argument("--method", choices=("SA", "DF"), default="SA")
    p.add_argument("--alpha", type=float, default=0.05)

    for name, text in (("pcr-debias", "debiased principal components regression"),
                       ("align-test", "alignment test on selected components")):
        p = sub.add_parser(name, help=text)
        _add_data(p)
        _add_common(p)
        p.add_argument("--j", required=True, help="top:k or a comma list of 0-based indices")
        p.add_argument("--q", type=float, default=0.1, help="FDR level of the alignment test")
        p.add_argument("--method", choices=("SA", "DF"), default="SA")
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--no-rescale", action="store_true",
                       help="keep the complement design at its original scale")

    p = sub.add_parser("fixed-point", help="solve the population fixed-point system")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--x", help="use the eigenvalues of this design")
    src.add_argument("--delta", type=float, help="Marchenko-Pastur law with sample ratio n/p")
    p.add_argument("--header", action="store_true")
    p.add_argument("--samples", type=int, default=100_000,
                   help="spectrum quantiles / prior draws")
    p.add_argument("--config", default=None, help="TOML/JSON with a [signal] table")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--penalty", type=_penalty, default=PenaltySpec(1.0, 0.1))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--format", choices=("json",), default="json")
    p.add_argument("--out", default=None)

    p = sub.add_parser("simulate", help="generate a design, signal and response")
    p.add_argument("--config", default=None, help="TOML/JSON with [design] and [signal] tables")
    p.add_argument("--family", default="matrix_normal")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--p", type=int, default=1000)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("experiment", help="Monte Carlo calibration or alignment study")
    p.add_argument("--config", required=True)
    p.add_argument("--study", choices=("calibration", "alignment"), default=None,
                   help="default: alignment when the config sets study = 'alignment'")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes (default SPECTRUM_DEBIAS_JOBS or 1)")
    p.add_argument("--out", default=None, help="output directory")
    return parser


def _load_xy(args):
    X = io.load_matrix(args.x, args.header)
    y = io.load_vector(args.y, args.header)
    if X.shape[0] != y.size:
        raise DimensionMismatchError(f"X has {X.shape[0]} rows but y has {y.size} entries",
                                     n_x=X.shape[0], n_y=y.size)
    return X, y


def _emit(args, payload=None, table=None, header=None):
    if args.format == "csv":
        int_cols = [i for i, h in enumerate(header) if h in INT_COLUMNS]
        if args.out:
            io.write_csv(args.out, table, header, int_cols)
        else:
            sys.stdout.write(",".join(header) + "\n")
            for line in io.format_rows(table, int_cols):
                sys.stdout.write(line + "\n")
        return
    text = io.dumps(payload)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _report_table(beta_u, tau_star, alpha):
    rep = infer(beta_u, tau_star, alpha)
    table = np.column_stack([np.arange(beta_u.size), beta_u, rep.pvalues, rep.intervals,
                             rep.decisions.astype(float)])
    return rep, table, ["index", "beta_u", "pvalue", "ci_lo", "ci_hi", "reject"]


def cmd_fit(args):
    X, y = _load_xy(args)
    fr = fit(X, y, args.penalty, tol=args.tol, max_iter=args.max_iter)
    payload = {"penalty": args.penalty.to_dict(), "beta_hat": fr.beta_hat,
               "iterations": fr.iterations, "kkt_residual": fr.kkt_residual,
               "objective": fr.objective, "converged": fr.converged, "s_hat": fr.s_hat}
    table = np.column_stack([np.arange(fr.beta_hat.size), fr.beta_hat])
    _emit(args, payload, table, ["index", "beta_hat"])


def cmd_debias(args):
    X, y = _load_xy(args)
    spec = decompose(X)
    fr = fit(X, y, args.penalty, tol=args.tol, max_iter=args.max_iter, spectrum=spec)
    if args.method == "DF":
        res = df_debias(X, y, fr, args.penalty)
    else:
        res = debias(X, y, fr, args.penalty, sigma2=args.sigma2, spectrum=spec,
                     feasibility_tol=args.feasibility_tol)
    payload = res.to_dict()
    table = header = None
    if res.tau_star > 0 and np.isfinite(res.tau_star):
        _, table, header = _report_table(res.beta_u, res.tau_star, args.alpha)
    elif args.format == "csv":
        raise InvalidInputError("no valid variance estimate; CSV inference table unavailable",
                                flags=list(res.flags))
    _emit(args, payload, table, header)


def _pcr(args):
    X, y = _load_xy(args)
    return debiased_pcr(X, y, args.j, args.penalty, sigma2=args.sigma2, q=args.q,
                        tol=args.tol, max_iter=args.max_iter,
                        feasibility_tol=args.feasibility_tol, method=args.method,
                        rescale=not args.no_rescale)


def cmd_pcr_debias(args):
    res = _pcr(args)
    payload = res.to_dict()
    table = header = None
    if args.format == "csv":
        _, table, header = _report_table(res.beta_pcr, res.tau_star, args.alpha)
    _emit(args, payload, table, header)


def cmd_align_test(args):
    res = _pcr(args)
    adjusted = _bh_adjusted(res.align_pvalues)
    rejected = np.zeros(res.J.size, dtype=bool)
    rejected[res.bh_rejected] = True
    payload = {"J": res.J, "q": res.q, "theta_pcr": res.theta_pcr,
               "se": np.sqrt(res.gamma_diag), "pvalues": res.align_pvalues,
               "adjusted_pvalues": adjusted, "rejected": res.J[res.bh_rejected],
               "omega_hat": res.omega_hat, "sigma2": res.sigma2, "flags": list(res.flags)}
    table = np.column_stack([res.J, res.theta_pcr, np.sqrt(res.gamma_diag), res.align_pvalues,
                             adjusted, rejected.astype(float)])
    _emit(args, payload, table, ["component", "theta", "se", "pvalue", "adjusted", "reject"])


def _signal_recipe(config_path, seed):
    if not config_path:
        return SignalRecipe(seed=seed)
    cfg = read_config(config_path)
    sig = dict(cfg.get("signal", {}))
    sig.setdefault("seed", seed)
    for key in ("weights", "means", "sds", "align_indices"):
        if key in sig:
            sig[key] = tuple(sig[key])
    return SignalRecipe(**sig)


def cmd_fixed_point(args):
    if args.x:
        d2 = decompose(io.load_matrix(args.x, args.header)).d2
    else:
        d2 = sample_marchenko_pastur(args.delta, args.samples, deterministic=True)
    recipe = _signal_recipe(args.config, args.seed)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
    prior = recipe.sample_prior(args.samples, rng)
    fp = solve_fixed_point(d2, prior, args.sigma2, args.penalty, max_iter=args.max_iter,
                           seed=args.seed)
    _emit(args, fp.to_dict())


def cmd_simulate(args):
    if args.config:
        cfg = dict(read_config(args.config))
        cfg.setdefault("seed", args.seed)
        cfg = {k: v for k, v in cfg.items() if k in ("design", "signal", "sigma2", "seed")}
    else:
        cfg = {"design": DesignRecipe(args.family, args.n, args.p, {}, args.seed),
               "signal": SignalRecipe(seed=args.seed), "sigma2": args.sigma2, "seed": args.seed}
    config = ExperimentConfig.from_dict(cfg)
    X, _, beta, y = simulate_dataset(config, args.trial)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = "bin" if args.format == "binary" else "csv"
    for name, A in (("X", X), ("y", y), ("beta_star", beta)):
        io.save_matrix(out / f"{name}.{ext}", A, args.format)
    meta = {"design": config.design.to_dict(), "signal": config.signal.to_dict(),
            "sigma2": config.sigma2, "seed": config.seed, "trial": args.trial}
    (out / "recipe.json").write_text(io.dumps(meta) + "\n")
    files = [f"X.{ext}", f"y.{ext}", f"beta_star.{ext}", "recipe.json"]
    sys.stdout.write(io.dumps({"out": str(out), "files": files}) + "\n")


def cmd_experiment(args):
    cfg = dict(read_config(args.config))
    study = args.study or cfg.pop("study", "calibration")
    cfg.pop("study", None)
    if args.trials is not None:
        cfg["trials"] = args.trials
    if args.seed is not None:
        cfg["seed"] = args.seed
    config = ExperimentConfig.from_dict(cfg)
    runner = run_alignment_study if study == "alignment" else run_calibration
    summary = runner(config, jobs=args.jobs, output_dir=args.out)
    sys.stdout.write(io.dumps(summary) + "\n")


COMMANDS = {
    "fit": cmd_fit,
    "debias": cmd_debias,
    "pcr-debias": cmd_pcr_debias,
    "align-test": cmd_align_test,
    "fixed-point": cmd_fixed_point,
    "simulate": cmd_simulate,
    "experiment": cmd_experiment,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except SpectrumDebiasError as exc:
        sys.stderr.write(json.dumps({"error": io.to_jsonable(exc.to_dict())}) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
