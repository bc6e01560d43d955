"""The adjustment equation ``g_p(gamma) = 1`` and degrees-of-freedom baselines."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import CertificateError, InvalidInputError
from .penalty import hpp_extended

NEWTON_MAX_ITER = 50
ROOT_TOL = 1e-12


@dataclass(frozen=True)
class AdjustmentProblem:
    """Eigenvalues ``d2`` and extended second derivatives ``hpp`` at the estimate.

    Infinite ``hpp`` entries drop out of every sum, so only the finite ones
    are kept together with the total length ``p``.
    """

    d2: np.ndarray
    hpp: np.ndarray

    def __post_init__(self):
        d2 = np.asarray(self.d2, dtype=np.float64).ravel()
        hpp = np.asarray(self.hpp, dtype=np.float64).ravel()
        if d2.shape != hpp.shape:
            raise InvalidInputError("d2 and hpp must have the same length")
        if np.any(d2 < 0) or np.any(np.isnan(hpp)) or np.any(hpp < 0):
            raise InvalidInputError("d2 and hpp must be non-negative")
        object.__setattr__(self, "d2", d2)
        object.__setattr__(self, "hpp", hpp)
        object.__setattr__(self, "_hfin", hpp[np.isfinite(hpp)])

    @classmethod
    def from_fit(cls, spectrum, beta_hat, pen):
        return cls(spectrum.d2, hpp_extended(pen, np.asarray(beta_hat)))

    @property
    def p(self):
        return self.d2.shape[0]

    @property
    def n_finite(self):
        return int(self._hfin.shape[0])

    def certificate_failure(self):
        """Reason the root is not guaranteed to exist uniquely, or None."""
        if self.n_finite == 0:
            return "every hpp entry is infinite (empty support); g_p is identically 1"
        if np.all(self.hpp > 0) or np.all(self.d2 > 0):
            return None
        if np.count_nonzero(self.d2) + np.count_nonzero(self.hpp) > self.p:
            return None
        return (
            "some hpp entries are zero, some eigenvalues are zero and "
            f"nnz(d2) + nnz(hpp) = {np.count_nonzero(self.d2) + np.count_nonzero(self.hpp)}"
            f" <= p = {self.p}"
        )

    def check(self):
        reason = self.certificate_failure()
        if reason is not None:
            raise CertificateError(f"adjustment equation not well defined: {reason}")

    def m(self, gamma):
        return float(np.sum(1.0 / (gamma + self._hfin))) / self.p

    def value_and_derivative(self, gamma):
        p = self.p
        inv = 1.0 / (gamma + self._hfin)
        m = float(inv.sum()) / p
        dm = -float((inv * inv).sum()) / p
        diff = self.d2 - gamma
        den = diff * m + 1.0
        g = float(np.sum(1.0 / den)) / p
        dg = -float(np.sum((diff * dm - m) / (den * den))) / p
        return g, dg


def g_p(prob, gamma):
    """``(1/p) sum_i 1 / ((d_i^2 - gamma) m(gamma) + 1)``, ``m(gamma) = (1/p) sum_j 1/(gamma + hpp_j)``."""
    gamma = float(gamma)
    if not gamma > 0:
        raise InvalidInputError("gamma must be positive")
    m = prob.m(gamma)
    den = (prob.d2 - gamma) * m + 1.0
    if np.any(den == 0):
        raise CertificateError("zero denominator in g_p")
    return float(np.sum(1.0 / den)) / prob.p


def solve_adjustment(prob, return_info=False):
    """Positive root of ``g_p(gamma) = 1``.

    Newton's method from ``mean(d2)`` with the analytic derivative; falls back
    to Brent's method on ``[1e-8 mean(d2), max(d2)]`` when an iterate leaves
    ``(0, max(d2)]`` or the iteration fails to converge.
    """
    prob.check()
    d2 = prob.d2
    dmax = float(d2.max())
    dmean = float(d2.mean())
    if dmax == 0:
        raise CertificateError("all eigenvalues are zero")

    gamma = dmean
    method = "newton"
    converged = False
    it = 0
    for it in range(1, NEWTON_MAX_ITER + 1):
        g, dg = prob.value_and_derivative(gamma)
        if abs(g - 1.0) <= ROOT_TOL:
            converged = True
            break
        if not dg > 0:
            break
        nxt = gamma - (g - 1.0) / dg
        if not 0 < nxt <= dmax:
            break
        if abs(nxt - gamma) <= ROOT_TOL * dmean:
            gamma = nxt
            converged = True
            break
        gamma = nxt

    if not converged:
        method = "brent"
        f = lambda x: prob.value_and_derivative(x)[0] - 1.0  # noqa: E731
        lo, hi = 1e-8 * dmean, dmax
        f_lo = f(lo)
        while f_lo > 0 and lo > 1e-300:
            lo *= 1e-4
            f_lo = f(lo)
        f_hi = f(hi)
        if f_hi < 0:
            raise CertificateError("adjustment equation has no root in (0, max(d2)]")
        if f_lo > 0:
            raise CertificateError("adjustment equation has no positive root")
        gamma = brentq(f, lo, hi, xtol=ROOT_TOL * dmean, rtol=4 * np.finfo(float).eps,
                       maxiter=500)
    if return_info:
        return gamma, {"method": method, "newton_iterations": it}
    return gamma


def df_adjustment_ridge(d2, lambda2, n):
    """Degrees-of-freedom adjustment ``1 - (1/n) sum d_i^2 / (d_i^2 + lambda2)``."""
    if not lambda2 > 0:
        raise InvalidInputError("lambda2 must be positive")
    d2 = np.asarray(d2, dtype=np.float64)
    return 1.0 - float(np.sum(d2 / (d2 + lambda2))) / n


def df_adjustment_lasso(s_hat, n):
    """Degrees-of-freedom adjustment ``1 - s_hat / n``."""
    if not 0 <= s_hat < n:
        raise InvalidInputError(f"s_hat must satisfy 0 <= s_hat < n, got {s_hat} with n = {n}")
    return 1.0 - s_hat / n


def df_adjustment_elastic_net(X, beta_hat, lambda2):
    """``1 - tr(X_S (X_S^T X_S + lambda2 I)^{-1} X_S^T) / n`` on the support S.

    Reduces to the ridge and Lasso formulas at the two ends of the family.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    S = np.flatnonzero(beta_hat)
    if S.size == 0:
        return 1.0
    s = np.linalg.svd(X[:, S], compute_uv=False)
    s2 = s * s
    if lambda2 == 0:
        df = float(np.count_nonzero(s2 > 1e-12 * s2[0]))
    else:
        df = float(np.sum(s2 / (s2 + lambda2)))
    if df >= n:
        raise InvalidInputError("degrees of freedom reach n; DF adjustment undefined")
    return 1.0 - df / n
