"""Spectrum-aware debiased estimator and its plug-in scalar statistics."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .adjust import (
    AdjustmentProblem,
    df_adjustment_elastic_net,
    solve_adjustment,
)
from .errors import FeasibilityError, InvalidInputError
from .penalty import hpp_extended
from .spectral import decompose
from .validation import check_coef, check_design, check_response

FEASIBILITY_TOL = 1e-6


@dataclass
class DebiasResult:
    """Debiased coefficients with the scalars needed for inference.

    ``valid`` is False when a scalar statistic came out non-positive; the
    reason is listed in ``flags``.
    """

    beta_hat: np.ndarray
    beta_u: np.ndarray
    adj: float
    eta_star: float
    tau_star: float
    tau_dstar: float
    sigma2: float
    sigma2_source: str
    feasibility_lhs: float
    r_dstar: np.ndarray
    flags: list = field(default_factory=list)
    method: str = "SA"

    @property
    def valid(self):
        return not any(f in INVALID_FLAGS for f in self.flags)

    def standardized(self, beta_star):
        return (self.beta_u - np.asarray(beta_star)) / np.sqrt(self.tau_star)

    def to_dict(self, include_vectors=True):
        out = {
            "method": self.method,
            "adj": self.adj,
            "eta_star": self.eta_star,
            "tau_star": self.tau_star,
            "tau_dstar": self.tau_dstar,
            "sigma2": self.sigma2,
            "sigma2_source": self.sigma2_source,
            "feasibility_lhs": self.feasibility_lhs,
            "valid": self.valid,
            "flags": list(self.flags),
        }
        if include_vectors:
            out["beta_u"] = self.beta_u.tolist()
            out["beta_hat"] = self.beta_hat.tolist()
        return out


INVALID_FLAGS = {"SIGMA2_NONPOSITIVE", "TAU_STAR_NONPOSITIVE"}


def eta_hat(adj, hpp):
    """``(mean_j 1 / (adj + hpp_j))^{-1}`` with ``1 / inf = 0``."""
    hpp = np.asarray(hpp, dtype=np.float64)
    fin = hpp[np.isfinite(hpp)]
    if fin.size == 0:
        raise InvalidInputError("eta is undefined when every hpp entry is infinite")
    return hpp.size / float(np.sum(1.0 / (adj + fin)))


def _gap(adj, eta):
    k = eta - adj
    if k == 0:
        raise InvalidInputError("eta equals adj; the penalty has zero curvature everywhere")
    return k


def tau_dstar_hat(X, y, beta_hat, adj, eta, sigma2, d2):
    """``(||(I + XX^T / (eta - adj)) r||^2 - n sigma2) / sum(d2)`` with ``r = y - X beta_hat``."""
    k = _gap(adj, eta)
    r = y - X @ beta_hat
    v = r + X @ (X.T @ r) / k
    return (float(v @ v) - X.shape[0] * sigma2) / float(np.sum(d2))


def r_dstar_hat(X, y, beta_hat, adj, eta):
    """Auxiliary estimate ``beta_hat + X^T (X beta_hat - y) / (eta - adj)``."""
    k = _gap(adj, eta)
    return beta_hat + X.T @ (X @ beta_hat - y) / k


def tau_dstar_from_r_dstar(X, y, r_dstar, sigma2, d2):
    """Second form of the tau** estimate: ``(||X r** - y||^2 - n sigma2) / sum(d2)``."""
    res = X @ r_dstar - y
    return (float(res @ res) - X.shape[0] * sigma2) / float(np.sum(d2))


def tau_star_hat(d2, adj, eta, sigma2, tau_dstar):
    """Per-eigenvalue average giving the variance of the debiased coordinates."""
    d2 = np.asarray(d2, dtype=np.float64)
    num = eta**2 * d2 * sigma2 + (d2 - adj + 2 * eta) * (adj - d2) * (eta - adj) ** 2 * tau_dstar
    den = (d2 - adj + eta) ** 2 * adj**2
    return float(np.mean(num / den))


def _shrink(d2, adj, eta):
    k = _gap(adj, eta)
    return k / (np.asarray(d2, dtype=np.float64) + k)


def feasibility_lhs(d2, adj, eta, n, p):
    """Ratio that must differ from one for the noise level to be estimable."""
    d2 = np.asarray(d2, dtype=np.float64)
    w = 1.0 - _shrink(d2, adj, eta) ** 2
    return (n / p) * float(np.mean(d2 * w)) / (float(np.mean(d2)) * float(np.mean(w)))


def sigma2_hat(X, y, beta_hat, adj, eta, d2, n, p, feasibility_tol=FEASIBILITY_TOL):
    """Plug-in estimate of the noise variance.

    Raises :class:`FeasibilityError` when the feasibility ratio is within
    ``feasibility_tol`` of one, where the estimate has a vanishing denominator.
    """
    d2 = np.asarray(d2, dtype=np.float64)
    ratio = feasibility_lhs(d2, adj, eta, n, p)
    if abs(ratio - 1.0) <= feasibility_tol:
        raise FeasibilityError(
            f"noise level not estimable: feasibility ratio {ratio:.8g} is within "
            f"{feasibility_tol:g} of 1; supply sigma2 instead",
            ratio=ratio,
        )
    k = _gap(adj, eta)
    r = y - X @ beta_hat
    v = r + X @ (X.T @ r) / k
    c2 = _shrink(d2, adj, eta) ** 2
    sd = float(np.sum(d2))
    num = float(r @ r) - float(v @ v) / sd * float(np.sum(c2 * d2))
    den = float(np.sum(c2 * (sd - n * d2))) / sd + n - p
    return num / den


def debias(X, y, fit, pen, sigma2=None, spectrum=None, feasibility_tol=FEASIBILITY_TOL):
    """Spectrum-aware debiasing of a penalised fit.

    Parameters
    ----------
    X, y : design and response.
    fit : FitResult or ndarray
        The penalised estimate ``beta_hat``.
    pen : PenaltySpec
    sigma2 : float, optional
        Known noise variance.  Estimated from the data when omitted.
    spectrum : DesignSpectrum, optional
        Reused instead of decomposing ``X`` again.

    Returns
    -------
    DebiasResult
    """
    X = check_design(X)
    n, p = X.shape
    y = check_response(y, n)
    beta_hat = check_coef(getattr(fit, "beta_hat", fit), p, "beta_hat")
    if spectrum is None:
        spectrum = decompose(X)
    d2 = spectrum.d2
    flags = []
    if getattr(fit, "converged", True) is False:
        flags.append("FIT_NOT_CONVERGED")

    hpp = hpp_extended(pen, beta_hat)
    adj = solve_adjustment(AdjustmentProblem(d2, hpp))
    eta = eta_hat(adj, hpp)

    ratio = feasibility_lhs(d2, adj, eta, n, p)
    if sigma2 is None:
        s2 = sigma2_hat(X, y, beta_hat, adj, eta, d2, n, p, feasibility_tol)
        source = "estimated"
        if not s2 > 0:
            flags.append("SIGMA2_NONPOSITIVE")
    else:
        s2 = float(sigma2)
        if s2 < 0:
            raise InvalidInputError("sigma2 must be non-negative")
        source = "known"

    beta_u = beta_hat + X.T @ (y - X @ beta_hat) / adj
    tdd = tau_dstar_hat(X, y, beta_hat, adj, eta, s2, d2)
    if tdd < 0:
        flags.append("TAU_DSTAR_CLAMPED")
        warnings.warn(f"tau** estimate {tdd:.3e} < 0 clamped to 0", RuntimeWarning, stacklevel=2)
        tdd = 0.0
    ts = tau_star_hat(d2, adj, eta, s2, tdd)
    if not ts > 0:
        flags.append("TAU_STAR_NONPOSITIVE")

    return DebiasResult(
        beta_hat=beta_hat,
        beta_u=beta_u,
        adj=float(adj),
        eta_star=float(eta),
        tau_star=float(ts),
        tau_dstar=float(tdd),
        sigma2=float(s2),
        sigma2_source=source,
        feasibility_lhs=float(ratio),
        r_dstar=r_dstar_hat(X, y, beta_hat, adj, eta),
        flags=flags,
    )


def df_debias(X, y, fit, pen):
    """Degrees-of-freedom debiasing with ``M = I`` as a comparison baseline.

    ``beta_u = beta_hat + X^T r / adj`` with ``adj = 1 - df / n`` and variance
    estimate ``||r||^2 / (n adj^2)``.
    """
    X = check_design(X)
    n, p = X.shape
    y = check_response(y, n)
    beta_hat = check_coef(getattr(fit, "beta_hat", fit), p, "beta_hat")
    adj = df_adjustment_elastic_net(X, beta_hat, pen.lambda2)
    r = y - X @ beta_hat
    tau = float(r @ r) / (n * adj * adj)
    nan = float("nan")
    return DebiasResult(
        beta_hat=beta_hat,
        beta_u=beta_hat + X.T @ r / adj,
        adj=float(adj),
        eta_star=nan,
        tau_star=tau,
        tau_dstar=nan,
        sigma2=nan,
        sigma2_source="unused",
        feasibility_lhs=nan,
        r_dstar=np.full(p, nan),
        flags=[],
        method="DF",
    )
