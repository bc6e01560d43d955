"""Debiased principal components regression and the PC-signal alignment test.

The signal is split into a part in the span of selected right singular
vectors ``O_J`` (estimated by ordinary PCR) and a remainder that is
debiased on a transformed dataset built from the remaining components.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfc

from .debias import FEASIBILITY_TOL, debias, df_debias
from .errors import InvalidInputError
from .fit import DEFAULT_MAX_ITER, DEFAULT_TOL, fit as fit_penalized
from .inference import benjamini_hochberg
from .spectral import DesignSpectrum, decompose
from .validation import check_design, check_response


def parse_components(J, spectrum):
    """Resolve ``J`` to a sorted array of 0-based component indices.

    Accepts ``"top:k"``, a comma separated string of indices, or any
    iterable of integers.  Components are ordered by decreasing eigenvalue.
    """
    if isinstance(J, str):
        text = J.strip()
        if text.startswith("top:"):
            k = int(text[4:])
            if k < 0:
                raise InvalidInputError("top:k needs k >= 0")
            idx = np.arange(k)
        elif text == "":
            idx = np.array([], dtype=int)
        else:
            idx = np.array([int(t) for t in text.split(",")], dtype=int)
    elif J is None:
        idx = np.array([], dtype=int)
    else:
        idx = np.asarray(list(J), dtype=int)
    idx = np.unique(idx)
    if idx.size and (idx.min() < 0 or idx.max() >= spectrum.p):
        raise InvalidInputError("component index out of range")
    if np.any(spectrum.d2[idx] == 0):
        raise InvalidInputError("selected components must have nonzero eigenvalues")
    if idx.size >= spectrum.n:
        raise InvalidInputError(f"|J| = {idx.size} must be smaller than n = {spectrum.n}")
    return idx


def _complement_indices(spectrum, J):
    nz = np.flatnonzero(spectrum.d2 > 0)
    Jbar = np.setdiff1d(nz, J)
    if Jbar.size == 0:
        raise InvalidInputError("no nonzero components remain outside J")
    return Jbar


def alignment_pcr(spectrum, y, J):
    """PCR coefficients on the components ``J`` and their image in feature space.

    Returns
    -------
    theta : ndarray of shape (|J|,)
        ``(Q y)_J / d_J``.
    beta_al : ndarray of shape (p,)
        ``O_J^T theta``.
    """
    J = np.asarray(J, dtype=int)
    if J.size == 0:
        return np.zeros(0), np.zeros(spectrum.p)
    y = check_response(y, spectrum.n)
    theta = (spectrum.Q[J] @ y) / np.sqrt(spectrum.d2[J])
    return theta, spectrum.O[J].T @ theta


def alignment_pcr_lstsq(X, spectrum, y, J):
    """Same estimate as :func:`alignment_pcr` by least squares on ``X O_J^T``."""
    J = np.asarray(J, dtype=int)
    if J.size == 0:
        return np.zeros(0), np.zeros(spectrum.p)
    Xt = np.asarray(X) @ spectrum.O[J].T
    theta = np.linalg.lstsq(Xt, y, rcond=None)[0]
    return theta, spectrum.O[J].T @ theta


def complement_dataset(spectrum, y, J, return_spectrum=False):
    """Dataset ``(diag(d_Jbar) O_Jbar, (Q y)_Jbar)`` over the non-selected components.

    With ``return_spectrum`` the decomposition of the new design is also
    returned, read off the cached factors rather than recomputed.
    """
    J = np.asarray(J, dtype=int)
    y = check_response(y, spectrum.n)
    Jbar = _complement_indices(spectrum, J)
    d = np.sqrt(spectrum.d2[Jbar])
    X_new = d[:, None] * spectrum.O[Jbar]
    y_new = spectrum.Q[Jbar] @ y
    if not return_spectrum:
        return X_new, y_new
    rest = np.setdiff1d(np.arange(spectrum.p), Jbar)
    d2_new = np.zeros(spectrum.p)
    d2_new[: Jbar.size] = spectrum.d2[Jbar]
    d2_new.setflags(write=False)
    spec_new = DesignSpectrum(
        n=int(Jbar.size),
        p=spectrum.p,
        Q=np.eye(Jbar.size),
        O=np.vstack([spectrum.O[Jbar], spectrum.O[rest]]),
        d2=d2_new,
        scale_factor=spectrum.scale_factor,
    )
    return X_new, y_new, spec_new


def alignment_test(theta, d2_J, sigma2, omega_hat, q=0.1):
    """Test ``H_i: theta_i = 0`` for each selected component.

    Returns
    -------
    s : standard errors ``sqrt(sigma2 / d2_J + omega_hat)``
    pvalues : two-sided Gaussian p-values
    rejected : positions (into ``theta``) rejected by Benjamini-Hochberg at ``q``
    """
    theta = np.asarray(theta, dtype=np.float64)
    d2_J = np.asarray(d2_J, dtype=np.float64)
    if np.any(d2_J <= 0):
        raise InvalidInputError("alignment test needs positive eigenvalues")
    s2 = sigma2 / d2_J + omega_hat
    if np.any(~(s2 > 0)):
        raise InvalidInputError("non-positive alignment test variance")
    s = np.sqrt(s2)
    pv = erfc(np.abs(theta) / s / np.sqrt(2.0))
    rejected = benjamini_hochberg(pv, q) if theta.size else np.array([], dtype=int)
    return s, pv, rejected


@dataclass
class PcrResult:
    J: np.ndarray
    theta_pcr: np.ndarray
    beta_al: np.ndarray
    beta_co: np.ndarray
    beta_pcr: np.ndarray
    tau_star: float
    omega_hat: float
    gamma_diag: np.ndarray
    align_pvalues: np.ndarray
    bh_rejected: np.ndarray
    complement: object
    complement_scale: float = 1.0
    q: float = 0.1
    flags: list = field(default_factory=list)

    @property
    def sigma2(self):
        return self.complement.sigma2

    def standardized(self, beta_star):
        return (self.beta_pcr - np.asarray(beta_star)) / np.sqrt(self.tau_star)

    def to_dict(self, include_vectors=True):
        out = self.complement.to_dict(include_vectors=False)
        out.update({
            "method": "PCR-" + self.complement.method,
            "tau_star": self.tau_star,
            "omega_hat": self.omega_hat,
            "complement_scale": self.complement_scale,
            "q": self.q,
            "J": self.J.tolist(),
            "theta_pcr": self.theta_pcr.tolist(),
            "align_se": np.sqrt(self.gamma_diag).tolist(),
            "align_pvalues": self.align_pvalues.tolist(),
            "bh_rejected": self.J[self.bh_rejected].tolist(),
            "flags": list(self.flags),
        })
        if include_vectors:
            out["beta_u"] = self.beta_pcr.tolist()
            out["beta_al"] = self.beta_al.tolist()
            out["beta_co"] = self.beta_co.tolist()
        return out


def debiased_pcr(X, y, J, pen, sigma2=None, q=0.1, spectrum=None, tol=DEFAULT_TOL,
                 max_iter=DEFAULT_MAX_ITER, feasibility_tol=FEASIBILITY_TOL, method="SA",
                 rescale=True):
    """PCR-spectrum-aware debiasing.

    Parameters
    ----------
    X, y : design and response.
    J : component selection, see :func:`parse_components`.
    pen : PenaltySpec for the complement problem.
    sigma2 : float, optional
        Known noise variance; estimated on the complement problem otherwise.
    q : float
        Benjamini-Hochberg level for the alignment test.
    method : {"SA", "DF"}
        Debiasing rule used on the complement problem.
    rescale : bool
        Scale the complement design to unit mean eigenvalue before fitting
        and map the estimate back.  Removing dominant components can leave a
        design whose scale is tiny next to the penalty.
    """
    X = check_design(X)
    y = check_response(y, X.shape[0])
    if spectrum is None:
        spectrum = decompose(X)
    J = parse_components(J, spectrum)
    p = spectrum.p

    theta, beta_al = alignment_pcr(spectrum, y, J)
    X_new, y_new, spec_new = complement_dataset(spectrum, y, J, return_spectrum=True)
    c = 1.0
    if rescale:
        c = 1.0 / np.sqrt(float(np.mean(spec_new.d2)))
        X_new = c * X_new
        d2c = spec_new.d2 * c * c
        d2c.setflags(write=False)
        spec_new = replace(spec_new, d2=d2c, scale_factor=spec_new.scale_factor * c)
    fr = fit_penalized(X_new, y_new, pen, tol=tol, max_iter=max_iter, spectrum=spec_new)
    if method == "SA":
        comp = debias(X_new, y_new, fr, pen, sigma2=sigma2, spectrum=spec_new,
                      feasibility_tol=feasibility_tol)
    elif method == "DF":
        comp = df_debias(X_new, y_new, fr, pen)
    else:
        raise InvalidInputError(f"unknown debiasing method {method!r}")

    flags = list(comp.flags)
    # the rescaled problem estimates zeta / c
    beta_co = c * comp.beta_u
    tau = c * c * comp.tau_star
    omega = float(beta_co @ beta_co) / p - tau
    if omega < 0:
        flags.append("OMEGA_CLAMPED")
        omega = 0.0

    s2_noise = comp.sigma2 if np.isfinite(comp.sigma2) else (sigma2 if sigma2 is not None else np.nan)
    if J.size and np.isfinite(s2_noise) and s2_noise > 0:
        s, pv, rej = alignment_test(theta, spectrum.d2[J], s2_noise, omega, q)
    else:
        s = np.full(J.size, np.nan)
        pv = np.full(J.size, np.nan)
        rej = np.array([], dtype=int)
        if J.size:
            flags.append("ALIGNMENT_TEST_UNAVAILABLE")

    return PcrResult(
        J=J,
        theta_pcr=theta,
        beta_al=beta_al,
        beta_co=beta_co,
        beta_pcr=beta_al + beta_co,
        tau_star=float(tau),
        omega_hat=float(omega),
        gamma_diag=s * s,
        align_pvalues=pv,
        bh_rejected=rej,
        complement=comp,
        complement_scale=float(c),
        q=float(q),
        flags=flags,
    )
