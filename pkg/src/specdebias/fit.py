"""Penalised least squares ``0.5 ||y - X b||^2 + sum h(b_j)`` by accelerated proximal gradient."""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceWarning, InvalidInputError
from .penalty import prox
from .validation import check_response

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 50_000
ZERO_SNAP = 1e-10


@dataclass
class FitResult:
    beta_hat: np.ndarray
    iterations: int
    kkt_residual: float
    objective: float
    converged: bool = True

    @property
    def support(self):
        return np.flatnonzero(self.beta_hat)

    @property
    def s_hat(self):
        return int(np.count_nonzero(self.beta_hat))


def objective(X, y, beta, pen):
    r = y - X @ beta
    return 0.5 * float(r @ r) + pen.value(beta)


def _kkt(grad, beta, pen):
    # grad is X^T (X beta - y); smallest subgradient of the full objective
    l1, l2 = pen.lambda1, pen.lambda2
    g = grad + l2 * beta
    nz = beta != 0
    res = np.empty_like(beta)
    res[nz] = g[nz] + l1 * np.sign(beta[nz])
    res[~nz] = np.maximum(np.abs(g[~nz]) - l1, 0.0)
    return float(np.max(np.abs(res))) if res.size else 0.0


def kkt_residual(X, y, beta, pen):
    """Max-norm of the minimal-norm subgradient of the objective at ``beta``."""
    return _kkt(X.T @ (X @ beta - y), beta, pen)


def _polish(X, y, Xty, beta, pen):
    # solve the stationarity equations on the current support with fixed signs
    S = np.flatnonzero(beta)
    if S.size == 0:
        return None
    if pen.lambda2 == 0 and S.size >= X.shape[0]:
        return None
    XS = X[:, S]
    A = XS.T @ XS
    A[np.diag_indices_from(A)] += pen.lambda2
    rhs = Xty[S] - pen.lambda1 * np.sign(beta[S])
    try:
        bS = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return None
    if pen.lambda1 > 0 and np.any(np.sign(bS) != np.sign(beta[S])):
        return None
    out = np.zeros_like(beta)
    out[S] = bS
    return out


def _snap(beta):
    thresh = ZERO_SNAP * max(1.0, float(np.max(np.abs(beta))) if beta.size else 0.0)
    beta = beta.copy()
    beta[np.abs(beta) <= thresh] = 0.0
    return beta


def fit(X, y, pen, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, spectrum=None,
        beta0=None, polish=True, check_every=10):
    """Minimise ``0.5 ||y - X beta||^2 + sum_j h(beta_j)``.

    Parameters
    ----------
    X : ndarray of shape (n, p)
    y : ndarray of shape (n,)
    pen : PenaltySpec
    tol : float
        Target for the KKT residual (max-norm of the minimal subgradient).
    max_iter : int
    spectrum : DesignSpectrum, optional
        Supplies the Lipschitz constant ``max(d2)`` without another SVD.
    beta0 : ndarray, optional
        Warm start.
    polish : bool
        Try an exact solve on the active set once the support settles.

    Returns
    -------
    FitResult
        ``converged`` is False, with a :class:`ConvergenceWarning`, when the
        residual target was not reached within ``max_iter`` iterations.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise InvalidInputError("X must be a finite 2-D array")
    n, p = X.shape
    y = check_response(y, n)
    if not tol > 0:
        raise InvalidInputError("tol must be positive")

    if spectrum is not None:
        L = float(spectrum.d2[0])
    else:
        L = float(np.linalg.norm(X, 2) ** 2) if X.any() else 0.0
    L = L + pen.lambda2  # smooth part includes the ridge term for the step

    Xty = X.T @ y
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=np.float64)
    if L == pen.lambda2:
        # X = 0: the minimiser is the minimiser of the penalty
        beta = np.zeros(p)
        return FitResult(beta, 0, _kkt(-Xty, beta, pen), objective(X, y, beta, pen))

    step = 1.0 / L
    Xb = X @ beta
    F = 0.5 * float((y - Xb) @ (y - Xb)) + pen.value(beta)
    z, Xz, t = beta, Xb, 1.0
    kkt = _kkt(X.T @ Xb - Xty, beta, pen)
    last_support = None
    tried_support = None
    it = 0
    # prox of the l1 part only; the ridge term is handled in the gradient so
    # the step 1/L with L = max(d2) + l2 is valid
    l1_only = type(pen)(pen.lambda1, 0.0) if pen.lambda1 > 0 else None

    while kkt > tol and it < max_iter:
        it += 1
        g = X.T @ Xz - Xty + pen.lambda2 * z
        w = z - step * g
        b_new = prox(l1_only, step, w) if l1_only is not None else w
        Xb_new = X @ b_new
        r = y - Xb_new
        F_new = 0.5 * float(r @ r) + pen.value(b_new)
        if F_new > F and z is not beta:
            # function-value restart from the last accepted iterate; a plain
            # step from beta is monotone up to rounding and is always accepted
            t, z, Xz = 1.0, beta, Xb
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            mom = (t - 1.0) / t_new
            z = b_new + mom * (b_new - beta)
            Xz = Xb_new + mom * (Xb_new - Xb)
            beta, Xb, F, t = b_new, Xb_new, F_new, t_new

        if it % check_every == 0:
            kkt = _kkt(X.T @ Xb - Xty, beta, pen)
            if kkt <= tol:
                break
            support = tuple(np.flatnonzero(beta))
            if polish and support == last_support and support != tried_support:
                tried_support = support
                cand = _polish(X, y, Xty, beta, pen)
                if cand is not None:
                    cand_kkt = kkt_residual(X, y, cand, pen)
                    cand_F = objective(X, y, cand, pen)
                    if cand_kkt < kkt and cand_F <= F + 1e-12 * max(1.0, abs(F)):
                        beta, Xb, F, kkt = cand, X @ cand, cand_F, cand_kkt
                        z, Xz, t = beta, Xb, 1.0
                        if kkt <= tol:
                            break
            last_support = support

    snapped = _snap(beta)
    if np.any(snapped != beta):
        beta = snapped
        kkt = kkt_residual(X, y, beta, pen)
        F = objective(X, y, beta, pen)
    converged = kkt <= tol
    if not converged:
        warnings.warn(
            f"fit stopped after {it} iterations with KKT residual {kkt:.3e} > tol {tol:.1e}",
            ConvergenceWarning, stacklevel=2,
        )
    return FitResult(beta, it, float(kkt), float(F), bool(converged))
