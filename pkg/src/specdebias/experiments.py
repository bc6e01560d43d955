"""Monte Carlo calibration and alignment studies on simulated designs."""

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .debias import debias, df_debias
from .designs import DesignRecipe, SignalRecipe, generate_design, generate_noise, generate_signal
from .errors import InputIOError, InvalidInputError, SpectrumDebiasError
from .fit import fit
from .inference import benjamini_hochberg, calibration_metrics, confidence_intervals, p_values
from .io import to_jsonable
from .pcr import debiased_pcr
from .penalty import PenaltySpec
from .spectral import decompose

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

METHODS = ("SA", "DF", "PCRSA", "PCRDF")
DEFAULT_ALPHAS = tuple(round(0.05 * k, 2) for k in range(1, 20))
JOBS_ENV = "SPECTRUM_DEBIAS_JOBS"


@dataclass
class ExperimentConfig:
    design: DesignRecipe
    signal: SignalRecipe = field(default_factory=SignalRecipe)
    sigma2: float = 1.0
    sigma2_known: bool = False
    penalty: PenaltySpec = field(default_factory=lambda: PenaltySpec(1.0, 0.1))
    method: str = "SA"
    J: str = None
    trials: int = 50
    alphas: tuple = DEFAULT_ALPHAS
    q_levels: tuple = (0.05, 0.1)
    fixed_signal: bool = True
    seed: int = 0
    tol: float = 1e-9
    max_iter: int = 50_000
    output_dir: str = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"method must be one of {METHODS}")
        if self.method.startswith("PCR") and not self.J:
            raise InvalidInputError("PCR methods need a component selection J")
        if self.trials < 1:
            raise InvalidInputError("trials must be positive")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        seed = int(d.get("seed", 0))
        design = d.pop("design")
        if not isinstance(design, DesignRecipe):
            design = DesignRecipe(design["family"], int(design["n"]), int(design["p"]),
                                  dict(design.get("params", {})), int(design.get("seed", seed)))
        signal = d.pop("signal", {})
        if not isinstance(signal, SignalRecipe):
            signal = dict(signal)
            signal.setdefault("seed", seed)
            for key in ("weights", "means", "sds", "align_indices"):
                if key in signal:
                    signal[key] = tuple(signal[key])
            signal = SignalRecipe(**signal)
        pen = d.pop("penalty", None)
        if pen is None:
            pen = PenaltySpec(1.0, 0.1)
        elif isinstance(pen, str):
            pen = PenaltySpec.parse(pen)
        elif isinstance(pen, dict):
            pen = PenaltySpec(float(pen.get("lambda1", 0.0)), float(pen.get("lambda2", 0.0)))
        if "alphas" in d:
            d["alphas"] = tuple(float(a) for a in d["alphas"])
        if "q_levels" in d:
            d["q_levels"] = tuple(float(a) for a in d["q_levels"])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        return cls(design=design, signal=signal, penalty=pen, **d)

    def to_dict(self):
        return {
            "design": self.design.to_dict(),
            "signal": self.signal.to_dict(),
            "sigma2": self.sigma2,
            "sigma2_known": self.sigma2_known,
            "penalty": str(self.penalty),
            "method": self.method,
            "J": self.J,
            "trials": self.trials,
            "alphas": list(self.alphas),
            "q_levels": list(self.q_levels),
            "fixed_signal": self.fixed_signal,
            "seed": self.seed,
            "tol": self.tol,
            "max_iter": self.max_iter,
        }


def read_config(path):
    """Raw mapping from a TOML or JSON config file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputIOError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise InputIOError(f"cannot parse config {path}: {exc}") from exc
    return data


def load_config(path):
    """Read an :class:`ExperimentConfig` from a TOML or JSON file."""
    data = dict(read_config(path))
    data.pop("study", None)
    return ExperimentConfig.from_dict(data)


def default_jobs(jobs=None):
    if jobs is not None:
        return max(1, int(jobs))
    env = os.environ.get(JOBS_ENV)
    return max(1, int(env)) if env else 1


def simulate_dataset(config, trial):
    """Design, spectrum, true signal and response for one trial."""
    X = generate_design(config.design, trial)
    spec = decompose(X)
    sig_trial = 0 if config.fixed_signal else trial
    beta_star = generate_signal(config.signal, config.design.p, spec.O, trial=sig_trial)
    eps = generate_noise(config.design.n, config.sigma2, config.seed, trial)
    return X, spec, beta_star, X @ beta_star + eps


def _estimate(config, X, spec, y):
    sigma2 = config.sigma2 if config.sigma2_known else None
    pen = config.penalty
    if config.method.startswith("PCR"):
        res = debiased_pcr(X, y, config.J, pen, sigma2=sigma2, spectrum=spec, tol=config.tol,
                           max_iter=config.max_iter, method=config.method[3:])
        return res.beta_pcr, res.tau_star, res
    fr = fit(X, y, pen, tol=config.tol, max_iter=config.max_iter, spectrum=spec)
    if config.method == "DF":
        res = df_debias(X, y, fr, pen)
    else:
        res = debias(X, y, fr, pen, sigma2=sigma2, spectrum=spec)
    return res.beta_u, res.tau_star, res


def run_trial(config, trial):
    """Everything one calibration trial contributes; a pure function of (config, trial)."""
    try:
        X, spec, beta_star, y = simulate_dataset(config, trial)
        beta_u, tau, res = _estimate(config, X, spec, y)
        flags = list(getattr(res, "flags", []))
        if not tau > 0 or not np.isfinite(tau):
            return {"trial": trial, "ok": False, "code": "INVALID_RESULT",
                    "message": f"tau_star = {tau}", "flags": flags}
        z = (beta_u - beta_star) / np.sqrt(tau)
        pv = p_values(beta_u, tau)
        metrics = {}
        for a in config.alphas:
            ci = confidence_intervals(beta_u, tau, a)
            metrics[a] = calibration_metrics(beta_star, pv, ci, a)
        comp = getattr(res, "complement", res)
        return {
            "trial": trial,
            "ok": True,
            "z": z,
            "ks": float(stats.kstest(z, "norm").statistic),
            "tau_star": float(tau),
            "sigma2_hat": float(comp.sigma2),
            "adj": float(comp.adj),
            "metrics": metrics,
            "flags": flags,
        }
    except (SpectrumDebiasError, np.linalg.LinAlgError) as exc:
        code = getattr(exc, "code", "LINALG")
        return {"trial": trial, "ok": False, "code": code, "message": str(exc), "flags": []}


def _map_trials(fn, config, jobs):
    trials = range(config.trials)
    if jobs == 1:
        return [fn(config, t) for t in trials]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        out = list(ex.map(fn, [config] * config.trials, trials))
    return sorted(out, key=lambda r: r["trial"])


def _mean(values):
    vals = [v for v in values if v is not None]
    return (math.fsum(vals) / len(vals)) if vals else None


def qq_points(z, k=199):
    """Pairs of (normal quantile, empirical quantile) at ``k`` evenly spaced levels."""
    levels = (np.arange(1, k + 1)) / (k + 1)
    return np.column_stack([stats.norm.ppf(levels), np.quantile(z, levels)])


def run_calibration(config, jobs=None, output_dir=None):
    """Repeat the simulate-fit-debias pipeline and summarise calibration.

    Returns a JSON-ready summary; with ``output_dir`` (or ``config.output_dir``)
    also writes ``summary.json``, ``errors_standardized.csv``, ``qq.csv`` and
    ``fcp_curve.csv``.
    """
    results = _map_trials(run_trial, config, default_jobs(jobs))
    ok = [r for r in results if r["ok"]]
    failed = [{k: r[k] for k in ("trial", "code", "message")} for r in results if not r["ok"]]

    curve = []
    for a in config.alphas:
        row = {"alpha": a}
        for key in ("fcp", "fpr", "tpr"):
            row[key] = _mean([r["metrics"][a][key] for r in ok])
        row["n_effective"] = len(ok)
        curve.append(row)

    pooled = np.concatenate([r["z"] for r in ok]) if ok else np.zeros(0)
    summary = {
        "config": config.to_dict(),
        "n_trials": config.trials,
        "n_effective": len(ok),
        "n_failed": len(failed),
        "failures": failed,
        "ks_per_trial": [r["ks"] for r in ok],
        "mean_ks": _mean([r["ks"] for r in ok]),
        "pooled_ks": float(stats.kstest(pooled, "norm").statistic) if pooled.size else None,
        "mean_tau_star": _mean([r["tau_star"] for r in ok]),
        "median_sigma2_hat": float(np.median([r["sigma2_hat"] for r in ok])) if ok else None,
        "flag_counts": _count_flags(results),
        "curve": curve,
    }
    summary = to_jsonable(summary)

    out = output_dir or config.output_dir
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
        with open(out / "errors_standardized.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "index", "z"])
            for r in ok:
                for i, v in enumerate(r["z"]):
                    w.writerow([r["trial"], i, repr(float(v))])
        with open(out / "qq.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theoretical", "empirical"])
            if pooled.size:
                for a, b in qq_points(pooled):
                    w.writerow([repr(float(a)), repr(float(b))])
        with open(out / "fcp_curve.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "fcp", "fpr", "tpr", "n_effective"])
            for row in curve:
                w.writerow([row["alpha"]] + ["" if row[k] is None else repr(row[k])
                                             for k in ("fcp", "fpr", "tpr")] + [row["n_effective"]])
    return summary


def _count_flags(results):
    counts = {}
    for r in results:
        for f in r.get("flags", []):
            counts[f] = counts.get(f, 0) + 1
    return counts


def alignment_angles(beta_star, O, J):
    """Angles in degrees between ``beta_star`` and the right singular vectors ``O[J]``."""
    nb = np.linalg.norm(beta_star)
    if nb == 0:
        return np.full(len(J), 90.0)
    cos = np.clip(O[np.asarray(J, dtype=int)] @ beta_star / nb, -1.0, 1.0)
    return np.degrees(np.arccos(cos))


def alignment_trial(config, trial):
    try:
        X, spec, beta_star, y = simulate_dataset(config, trial)
        sigma2 = config.sigma2 if config.sigma2_known else None
        res = debiased_pcr(X, y, config.J, config.penalty, sigma2=sigma2, spectrum=spec,
                           tol=config.tol, max_iter=config.max_iter, q=max(config.q_levels),
                           method=config.method[3:] if config.method.startswith("PCR") else "SA")
        truth = np.isin(res.J, np.asarray(config.signal.align_indices, dtype=int))
        rejections = {}
        for q in config.q_levels:
            rej = np.zeros(res.J.size, dtype=bool)
            if np.all(np.isfinite(res.align_pvalues)):
                rej[benjamini_hochberg(res.align_pvalues, q)] = True
            rejections[q] = rej
        adjusted = _bh_adjusted(res.align_pvalues)
        return {
            "trial": trial, "ok": True, "J": res.J, "pvalues": res.align_pvalues,
            "adjusted": adjusted, "rejections": rejections, "truth": truth,
            "angles": alignment_angles(beta_star, spec.O, res.J),
            "theta": res.theta_pcr, "se": np.sqrt(res.gamma_diag),
        }
    except (SpectrumDebiasError, np.linalg.LinAlgError) as exc:
        return {"trial": trial, "ok": False, "code": getattr(exc, "code", "LINALG"),
                "message": str(exc)}


def _bh_adjusted(pvalues):
    p = np.asarray(pvalues, dtype=np.float64)
    m = p.size
    if m == 0:
        return p
    order = np.argsort(p)
    ranked = p[order] * m / np.arange(1, m + 1)
    adj = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adj, 1.0)
    return out


def run_alignment_study(config, jobs=None, output_dir=None):
    """Alignment test repeated over trials: power on aligned PCs and FDR on the rest."""
    if not config.J:
        raise InvalidInputError("alignment study needs a component selection J")
    results = _map_trials(alignment_trial, config, default_jobs(jobs))
    ok = [r for r in results if r["ok"]]
    failed = [{k: r[k] for k in ("trial", "code", "message")} for r in results if not r["ok"]]

    per_q = {}
    for q in config.q_levels:
        fdp, all_rejected, any_false = [], [], []
        for r in ok:
            rej, truth = r["rejections"][q], r["truth"]
            nrej = int(rej.sum())
            fdp.append(float((rej & ~truth).sum()) / nrej if nrej else 0.0)
            any_false.append(bool((rej & ~truth).any()))
            all_rejected.append(bool(rej[truth].all()) if truth.any() else None)
        per_q[str(q)] = {
            "fdr": _mean(fdp),
            "familywise_false_rejection": _mean([float(v) for v in any_false]),
            "all_aligned_rejected_rate": _mean([float(v) for v in all_rejected if v is not None]),
        }

    summary = to_jsonable({
        "config": config.to_dict(),
        "n_trials": config.trials,
        "n_effective": len(ok),
        "n_failed": len(failed),
        "failures": failed,
        "per_q": per_q,
        "mean_adjusted_pvalues": (np.mean([r["adjusted"] for r in ok], axis=0) if ok else []),
        "mean_angles": (np.mean([r["angles"] for r in ok], axis=0) if ok else []),
    })

    out = output_dir or config.output_dir
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
        with open(out / "alignment.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["trial", "component", "aligned", "theta", "se", "pvalue", "adjusted_pvalue",
                      "angle_deg"] + [f"reject_q{q}" for q in config.q_levels]
            w.writerow(header)
            for r in ok:
                for i, j in enumerate(r["J"]):
                    w.writerow([r["trial"], int(j), int(r["truth"][i]), repr(float(r["theta"][i])),
                                repr(float(r["se"][i])), repr(float(r["pvalues"][i])),
                                repr(float(r["adjusted"][i])), repr(float(r["angles"][i]))]
                               + [int(r["rejections"][q][i]) for q in config.q_levels])
    return summary
