"""Reproducible simulated designs, signals and noise.

Every random quantity comes from its own named stream derived from
``(seed, stream, trial)``, so that e.g. the signal can be held fixed while
the noise is redrawn.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InvalidInputError
from .spectral import rescale_unit_mean_eig

STREAMS = {"design": 0, "signal": 1, "noise": 2, "haar": 3}

FAMILY_DEFAULTS = {
    "matrix_normal": {"rho": 0.5, "row_df_factor": 1.1},
    "matrix_normal_b": {"rho": 0.9, "row_df_factor": 1.002},
    "spiked": {"spikes": [10.0] * 50, "noise_sd": "1/n"},
    "spiked_b": {"spikes": [500.0, 250.0, 50.0], "noise_sd": "1/n"},
    "lnn": {"factors": 4, "power": 1},
    "lnn_b": {"factors": 2, "power": 15},
    "var": {"ar": [0.4, 0.08, 0.04], "row_df_factor": 1.1, "zero_first_row": False},
    "var_b": {"ar": [0.7, 0.14, 0.07], "row_df_factor": 1.1, "zero_first_row": True},
    "mult_t": {"df": 3.0},
    "mult_cauchy": {"df": 1.0},
}

BASE_FAMILIES = ("matrix_normal", "spiked", "lnn", "var", "mult_t")
HARD_FAMILIES = ("matrix_normal_b", "spiked_b", "lnn_b", "var_b", "mult_cauchy")


def stream(seed, name, trial=0):
    """Independent Philox generator for one named stream of one trial."""
    if name not in STREAMS:
        raise InvalidInputError(f"unknown stream {name!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAMS[name], int(trial)))
    return np.random.Generator(np.random.Philox(ss))


def haar_orthogonal(p, seed=0):
    """Haar-distributed ``p x p`` orthogonal matrix (QR of a Gaussian, sign-fixed)."""
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed, "haar")
    G = rng.standard_normal((p, p))
    Q, R = np.linalg.qr(G)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def _haar_columns(rng, dim, m):
    # first m columns of a Haar orthogonal matrix
    Q, R = np.linalg.qr(rng.standard_normal((dim, m)))
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def _inv_wishart_factor(rng, p, df):
    # lower Bartlett factor A of W ~ Wishart(I, df); the inverse Wishart draw is A^{-T} A^{-1}
    if not df > p - 1:
        raise InvalidInputError(f"inverse-Wishart degrees of freedom {df} must exceed p - 1 = {p - 1}")
    A = np.tril(rng.standard_normal((p, p)), -1)
    A[np.diag_indices(p)] = np.sqrt(rng.chisquare(df - np.arange(p)))
    return A


def _apply_row_cov(rng, Z, df_factor):
    # Z M with M^T M ~ InverseWishart(I, df_factor p) and M = A^{-1}
    if df_factor is None:
        return Z
    p = Z.shape[1]
    A = _inv_wishart_factor(rng, p, df_factor * p)
    return solve_triangular(A, Z.T, lower=True, trans="T").T


def _matrix_normal(rng, n, p, rho, row_df_factor):
    Z = rng.standard_normal((n, p))
    if rho:
        # AR(1) recursion down the rows gives column covariance rho^|i-j|
        s = np.sqrt(1.0 - rho * rho)
        for i in range(1, n):
            Z[i] = rho * Z[i - 1] + s * Z[i]
    return _apply_row_cov(rng, Z, row_df_factor)


def _noise_sd(value, n):
    if isinstance(value, str):
        table = {"1/n": 1.0 / n, "1/sqrt(n)": 1.0 / np.sqrt(n)}
        if value not in table:
            raise InvalidInputError(f"noise_sd must be a number, '1/n' or '1/sqrt(n)', got {value!r}")
        return table[value]
    return float(value)


def _spiked(rng, n, p, spikes, noise_sd):
    spikes = np.asarray(spikes, dtype=np.float64)
    m = spikes.size
    if m > min(n, p):
        raise InvalidInputError("more spikes than min(n, p)")
    V = _haar_columns(rng, n, m)
    W = _haar_columns(rng, p, m)
    return (V * spikes) @ W.T + _noise_sd(noise_sd, n) * rng.standard_normal((n, p))


def _lnn(rng, n, p, factors, power):
    if factors < 1:
        raise InvalidInputError("lnn needs at least one factor")
    mats = [rng.standard_normal((n, n)) for _ in range(factors - 1)]
    last = rng.standard_normal((n, p))
    X = last
    for i, M in enumerate(reversed(mats)):
        # the first factor carries the power
        if i == len(mats) - 1 and power != 1:
            M = np.linalg.matrix_power(M / np.sqrt(n), int(power))
        else:
            M = M / np.sqrt(n)
        X = M @ X
    return X


def _var(rng, n, p, ar, row_df_factor, zero_first_row):
    ar = np.asarray(ar, dtype=np.float64)
    E = _apply_row_cov(rng, rng.standard_normal((n, p)), row_df_factor)
    X = np.zeros((n, p))
    for i in range(n):
        if i == 0 and zero_first_row:
            continue
        acc = E[i].copy()
        for k in range(1, min(ar.size, i) + 1):
            acc += ar[k - 1] * X[i - k]
        X[i] = acc
    return X


def _mult_t(rng, n, p, df):
    Z = rng.standard_normal((n, p))
    w = np.sqrt(rng.chisquare(df, size=n) / df)
    return Z / w[:, None]


@dataclass
class DesignRecipe:
    family: str
    n: int
    p: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILY_DEFAULTS:
            raise InvalidInputError(
                f"unknown design family {self.family!r}; choose from {sorted(FAMILY_DEFAULTS)}"
            )
        if self.n < 1 or self.p < 1:
            raise InvalidInputError("n and p must be positive")
        unknown = set(self.params) - set(FAMILY_DEFAULTS[self.family])
        if unknown:
            raise InvalidInputError(f"unknown parameters for {self.family}: {sorted(unknown)}")

    @property
    def resolved_params(self):
        out = dict(FAMILY_DEFAULTS[self.family])
        out.update(self.params)
        return out

    def to_dict(self):
        return {"family": self.family, "n": self.n, "p": self.p,
                "params": self.resolved_params, "seed": self.seed}


def generate_design(recipe, trial=0, rescale=True):
    """Draw a design for ``recipe``; rescaled to unit mean eigenvalue by default."""
    rng = stream(recipe.seed, "design", trial)
    n, p, kw = recipe.n, recipe.p, recipe.resolved_params
    fam = recipe.family
    if fam.startswith("matrix_normal"):
        X = _matrix_normal(rng, n, p, kw["rho"], kw["row_df_factor"])
    elif fam.startswith("spiked"):
        X = _spiked(rng, n, p, kw["spikes"], kw["noise_sd"])
    elif fam.startswith("lnn"):
        X = _lnn(rng, n, p, int(kw["factors"]), int(kw["power"]))
    elif fam.startswith("var"):
        X = _var(rng, n, p, kw["ar"], kw["row_df_factor"], kw["zero_first_row"])
    else:
        X = _mult_t(rng, n, p, kw["df"])
    if rescale:
        X, _ = rescale_unit_mean_eig(X)
    return X


@dataclass
class SignalRecipe:
    """Mixture law for the coordinates of ``zeta`` plus an optional aligned part.

    The aligned part is ``sum_i magnitude * scale * o_{J(i)}`` where ``o_j`` is
    the j-th right singular vector (0-based, decreasing eigenvalue) and
    ``scale`` is ``sqrt(p)`` when ``align_scale == "sqrt_p"``.
    """

    weights: tuple = (0.24, 0.06, 0.7)
    means: tuple = (-20.0, 10.0, 0.0)
    sds: tuple = (1.0, 1.0, 0.0)
    scale: float = 1.0
    align_indices: tuple = ()
    align_magnitude: float = 5.0
    align_scale: str = "sqrt_p"
    seed: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if not (len(self.weights) == len(self.means) == len(self.sds)):
            raise InvalidInputError("mixture weights, means and sds must have equal length")
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise InvalidInputError("mixture weights must be non-negative and sum to 1")
        if self.align_scale not in ("sqrt_p", "none"):
            raise InvalidInputError("align_scale must be 'sqrt_p' or 'none'")

    def sample_prior(self, size, rng):
        """Draws from the (scaled) mixture law of the unaligned coordinates."""
        comp = rng.choice(len(self.weights), size=size, p=np.asarray(self.weights, dtype=float))
        mu = np.asarray(self.means, dtype=float)[comp]
        sd = np.asarray(self.sds, dtype=float)[comp]
        return self.scale * (mu + sd * rng.standard_normal(size))

    def to_dict(self):
        return {
            "weights": list(self.weights), "means": list(self.means), "sds": list(self.sds),
            "scale": self.scale, "align_indices": list(self.align_indices),
            "align_magnitude": self.align_magnitude, "align_scale": self.align_scale,
            "seed": self.seed,
        }


def alignment_component(recipe, O):
    p = O.shape[1]
    idx = np.asarray(recipe.align_indices, dtype=int)
    if idx.size == 0:
        return np.zeros(p)
    if idx.min() < 0 or idx.max() >= O.shape[0]:
        raise InvalidInputError("alignment index out of range")
    mag = recipe.align_magnitude * (np.sqrt(p) if recipe.align_scale == "sqrt_p" else 1.0)
    return mag * O[idx].sum(axis=0)


def generate_signal(recipe, p, O=None, trial=0):
    """``beta* = beta_al + zeta`` with ``zeta`` iid from the mixture."""
    if len(recipe.align_indices) and O is None:
        raise InvalidInputError("an aligned signal needs the right singular basis O")
    zeta = recipe.sample_prior(p, stream(recipe.seed, "signal", trial))
    if O is None:
        return zeta
    return zeta + alignment_component(recipe, O)


def generate_noise(n, sigma2, seed=0, trial=0):
    return np.sqrt(sigma2) * stream(seed, "noise", trial).standard_normal(n)
