"""Coordinate-wise tests, confidence intervals and calibration metrics."""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, ndtr, ndtri

from .errors import InvalidInputError
from .validation import check_level

_SQRT2 = np.sqrt(2.0)


def _check_tau(tau_star):
    tau_star = float(tau_star)
    if not tau_star > 0:
        raise InvalidInputError(f"tau_star must be positive, got {tau_star}")
    return tau_star


def p_values(beta_u, tau_star):
    """Two-sided p-values ``2 (1 - Phi(|beta_u| / sqrt(tau_star)))``."""
    tau_star = _check_tau(tau_star)
    z = np.abs(np.asarray(beta_u, dtype=np.float64)) / np.sqrt(tau_star)
    # erfc keeps full relative accuracy deep in the tail
    return erfc(z / _SQRT2)


def quantile_offsets(alpha, symmetric=True, a=None):
    """Offsets ``(a, b)`` with ``Phi(b) - Phi(a) = 1 - alpha``.

    The symmetric choice is ``a = Phi^{-1}(alpha / 2)``.  Otherwise ``a`` must
    be given and ``b`` is solved for.
    """
    alpha = check_level(alpha)
    if symmetric:
        return float(ndtri(alpha / 2)), float(ndtri(1 - alpha / 2))
    if a is None:
        raise InvalidInputError("asymmetric intervals need the lower offset a")
    target = ndtr(a) + 1 - alpha
    if not 0 < target < 1:
        raise InvalidInputError("no upper offset b matches this lower offset")
    return float(a), float(ndtri(target))


def confidence_intervals(beta_u, tau_star, alpha, symmetric=True, a=None):
    """Intervals ``[beta_u + a sqrt(tau), beta_u + b sqrt(tau)]`` as an (p, 2) array."""
    tau_star = _check_tau(tau_star)
    lo, hi = quantile_offsets(alpha, symmetric, a)
    beta_u = np.asarray(beta_u, dtype=np.float64)
    s = np.sqrt(tau_star)
    return np.column_stack([beta_u + lo * s, beta_u + hi * s])


def _ratio(num, den):
    return None if den == 0 else num / den


def calibration_metrics(beta_star, pvalues, intervals, alpha):
    """False positive rate, true positive rate and false coverage proportion.

    A rate whose denominator is empty is reported as ``None``.
    """
    beta_star = np.asarray(beta_star, dtype=np.float64)
    pvalues = np.asarray(pvalues, dtype=np.float64)
    intervals = np.asarray(intervals, dtype=np.float64)
    reject = pvalues <= alpha
    null = beta_star == 0
    fpr = _ratio(int(np.sum(reject & null)), int(np.sum(null)))
    tpr = _ratio(int(np.sum(reject & ~null)), int(np.sum(~null)))
    covered = (intervals[:, 0] <= beta_star) & (beta_star <= intervals[:, 1])
    fcp = _ratio(int(np.sum(~covered)), beta_star.size)
    return {"fpr": fpr, "tpr": tpr, "fcp": fcp}


def tpr_limit(prior_samples, tau_star, alpha, mu0=0.0):
    """Limiting true positive rate among signals with ``|B| >= mu0``.

    The Gaussian part is integrated exactly for each prior draw, so only the
    prior is Monte Carlo.
    """
    tau_star = _check_tau(tau_star)
    alpha = check_level(alpha)
    b = np.asarray(prior_samples, dtype=np.float64)
    keep = (np.abs(b) > 0) & (np.abs(b) >= mu0)
    if not np.any(keep):
        raise InvalidInputError("prior has no mass on signals with |B| >= mu0")
    m = b[keep] / np.sqrt(tau_star)
    q = ndtri(1 - alpha / 2)
    return float(np.mean(ndtr(m - q) + ndtr(-m - q)))


def benjamini_hochberg(pvalues, q):
    """Indices rejected by the Benjamini-Hochberg step-up rule at level ``q``."""
    q = check_level(q, "q")
    p = np.asarray(pvalues, dtype=np.float64).ravel()
    m = p.size
    if m == 0:
        return np.array([], dtype=int)
    order = np.argsort(p, kind="stable")
    passed = np.flatnonzero(p[order] <= q * np.arange(1, m + 1) / m)
    if passed.size == 0:
        return np.array([], dtype=int)
    return np.sort(order[: passed[-1] + 1])


@dataclass
class InferenceReport:
    beta_u: np.ndarray
    pvalues: np.ndarray
    decisions: np.ndarray
    intervals: np.ndarray
    alpha: float
    a: float
    b: float

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "beta_u", "pvalue", "ci_lo", "ci_hi", "reject"])
            for i in range(self.beta_u.size):
                w.writerow([
                    i, repr(float(self.beta_u[i])), repr(float(self.pvalues[i])),
                    repr(float(self.intervals[i, 0])), repr(float(self.intervals[i, 1])),
                    int(self.decisions[i]),
                ])


def infer(beta_u, tau_star, alpha=0.05, symmetric=True, a=None):
    """Bundle p-values, decisions and intervals at level ``alpha``."""
    beta_u = np.asarray(beta_u, dtype=np.float64)
    pv = p_values(beta_u, tau_star)
    lo, hi = quantile_offsets(alpha, symmetric, a)
    return InferenceReport(
        beta_u=beta_u,
        pvalues=pv,
        decisions=pv <= alpha,
        intervals=confidence_intervals(beta_u, tau_star, alpha, symmetric, a),
        alpha=float(alpha),
        a=lo,
        b=hi,
    )
