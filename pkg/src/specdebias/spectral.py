"""Singular value decomposition of designs and empirical transforms of their spectra.

The design is factorised as ``X = Q.T @ D @ O`` where ``Q`` (n x n) and
``O`` (p x p) are orthogonal and ``D`` is the n x p diagonal matrix of
singular values.  ``d2`` always has length ``p``: the eigenvalues of
``X.T @ X`` in descending order, padded with zeros when ``n < p``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .validation import check_design

CLAMP_RTOL = 1e-12
BISECT_EPS = 1e-9
BISECT_TOL = 1e-12


@dataclass(frozen=True)
class DesignSpectrum:
    """Factorisation ``X = Q.T @ D @ O`` with padded eigenvalue vector ``d2``.

    Attributes
    ----------
    n, p : int
        Sample and feature counts.
    Q : ndarray of shape (n, n)
        Left singular basis (rows are left singular vectors).
    O : ndarray of shape (p, p)
        Right singular basis (rows are right singular vectors).
    d2 : ndarray of shape (p,)
        Eigenvalues of ``X.T @ X``, descending, zero padded.
    scale_factor : float
        Multiplier already applied to the design, 1 when none was applied.
    """

    n: int
    p: int
    Q: np.ndarray = field(repr=False)
    O: np.ndarray = field(repr=False)
    d2: np.ndarray
    scale_factor: float = 1.0

    @property
    def rank(self):
        return int(np.count_nonzero(self.d2))

    @property
    def singular_values(self):
        """The ``min(n, p)`` singular values, descending."""
        return np.sqrt(self.d2[: min(self.n, self.p)])

    @property
    def d_minus(self):
        """Smallest nonzero eigenvalue, used as the empirical lower spectral edge."""
        nz = self.d2[self.d2 > 0]
        return float(nz.min())

    @property
    def D(self):
        k = min(self.n, self.p)
        D = np.zeros((self.n, self.p))
        D[np.arange(k), np.arange(k)] = self.singular_values
        return D

    def reconstruct(self):
        k = min(self.n, self.p)
        return (self.Q[:k].T * self.singular_values) @ self.O[:k]

    def diagnostics(self):
        return {
            "n": self.n,
            "p": self.p,
            "rank": self.rank,
            "mean_d2": float(self.d2.mean()),
            "max_d2": float(self.d2[0]),
            "d_minus": self.d_minus,
            "scale_factor": float(self.scale_factor),
        }


def decompose(X, scale_factor=1.0):
    """Exact dense SVD of ``X`` returned as a :class:`DesignSpectrum`.

    Eigenvalues below ``1e-12 * max(d2)`` are set to zero.  Each right
    singular vector is signed so that its first nonzero entry is
    non-negative; the matching left vector is flipped with it.
    """
    X = check_design(X)
    n, p = X.shape
    U, s, Vt = np.linalg.svd(X, full_matrices=True)
    k = s.shape[0]
    d2k = s**2
    d2k[d2k < CLAMP_RTOL * d2k[0]] = 0.0

    Q = U.T.copy()
    O = Vt.copy()
    first = np.argmax(np.abs(O) > 1e-14, axis=1)
    signs = np.sign(O[np.arange(p), first])
    signs[signs == 0] = 1.0
    O *= signs[:, None]
    Q[:k] *= signs[:k, None]

    d2 = np.zeros(p)
    d2[:k] = d2k
    d2.setflags(write=False)
    return DesignSpectrum(n=n, p=p, Q=Q, O=O, d2=d2, scale_factor=float(scale_factor))


def rescale_unit_mean_eig(X):
    """Scale ``X`` so that the eigenvalues of ``X.T @ X`` average to one.

    Returns
    -------
    X_scaled : ndarray
    scale_factor : float
        ``X_scaled = scale_factor * X``.
    """
    X = check_design(X)
    # mean eigenvalue of X^T X is ||X||_F^2 / p
    mean_eig = np.sum(X * X) / X.shape[1]
    scale = 1.0 / np.sqrt(mean_eig)
    Xs = X * scale
    # one correction pass removes the rounding left by the first product
    scale2 = 1.0 / np.sqrt(np.sum(Xs * Xs) / X.shape[1])
    return Xs * scale2, float(scale * scale2)


def empirical_cauchy(d2, z):
    """Cauchy transform ``G(z) = mean(1 / (z + d2))`` of the empirical spectral law.

    ``z`` may be a scalar or an array; every ``z + d2`` must be positive.
    """
    d2 = np.asarray(d2, dtype=np.float64)
    z_arr = np.asarray(z, dtype=np.float64)
    lo = -d2.min()
    if np.any(z_arr <= lo):
        raise InvalidInputError(
            f"Cauchy transform evaluated at or below the pole z = {lo:.6g}"
        )
    out = np.mean(1.0 / (z_arr[..., None] + d2), axis=-1)
    return float(out) if out.ndim == 0 else out


def cauchy_range(d2):
    """Upper end ``G(-min(d2) + eps)`` of the range on which G can be inverted."""
    d2 = np.asarray(d2, dtype=np.float64)
    dmin = d2.min()
    if dmin == 0.0:
        return np.inf
    return float(np.mean(1.0 / (d2 - dmin + BISECT_EPS)))


def inverse_cauchy(d2, z):
    """Solve ``G(w) = z`` for ``w > -min(d2)`` by monotone bisection."""
    d2 = np.asarray(d2, dtype=np.float64)
    z = float(z)
    if not z > 0:
        raise InvalidInputError(f"R-transform argument must be positive, got {z}")
    dmin, dmax = float(d2.min()), float(d2.max())
    lo = -dmin + BISECT_EPS
    if z >= cauchy_range(d2):
        raise InvalidInputError(
            f"z = {z:.6g} lies outside the empirical range of the Cauchy transform"
        )
    # G(w) lies between 1/(w + dmax) and 1/(w + dmin)
    lo = max(lo, 1.0 / z - dmax)
    hi = 1.0 / z - dmin
    if hi <= lo:
        return hi
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if np.mean(1.0 / (mid + d2)) > z:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECT_TOL * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def empirical_r_transform(d2, z):
    """R-transform ``R(z) = G^{-1}(z) - 1/z`` of the empirical spectral law."""
    return inverse_cauchy(d2, z) - 1.0 / float(z)


def _mp_quantile_table(c, grid=20001):
    # continuous Marchenko-Pastur law with ratio c <= 1 and unit mean;
    # the substitution x = m - r cos(t) removes the square-root edges
    a, b = (1 - np.sqrt(c)) ** 2, (1 + np.sqrt(c)) ** 2
    m, r = 0.5 * (a + b), 0.5 * (b - a)
    t = np.linspace(0.0, np.pi, grid)
    x = m - r * np.cos(t)
    dens = (r * np.sin(t)) ** 2 / (2 * np.pi * c * x)
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(t))))
    cdf /= cdf[-1]
    return cdf, x


def marchenko_pastur_quantile(delta, u):
    """Quantile function of the unit-mean limiting eigenvalue law of ``X.T @ X``.

    ``delta = n / p``.  For ``delta >= 1`` this is the Marchenko-Pastur law
    with ratio ``1 / delta``; for ``delta < 1`` it has an atom of mass
    ``1 - delta`` at zero and the rest is ``MP(delta) / delta``.
    """
    delta = float(delta)
    if delta <= 0:
        raise InvalidInputError("delta must be positive")
    u = np.asarray(u, dtype=np.float64)
    if delta >= 1:
        cdf, x = _mp_quantile_table(1.0 / delta)
        return np.interp(u, cdf, x)
    cdf, x = _mp_quantile_table(delta)
    atom = 1.0 - delta
    v = np.clip((u - atom) / delta, 0.0, 1.0)
    return np.where(u <= atom, 0.0, np.interp(v, cdf, x) / delta)


def sample_marchenko_pastur(delta, size, rng=None, deterministic=False):
    """Draw ``size`` eigenvalues from the unit-mean law of :func:`marchenko_pastur_quantile`.

    With ``deterministic=True`` the midpoint quantiles ``(k + 1/2) / size``
    are returned instead of random draws.
    """
    if deterministic:
        u = (np.arange(size) + 0.5) / size
    else:
        rng = np.random.default_rng(rng)
        u = rng.random(size)
    return np.sort(marchenko_pastur_quantile(delta, u))[::-1]
