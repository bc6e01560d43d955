"""Population fixed point of the debiasing theory and VAMP iterations that track the estimator.

The fixed point ``(gamma, eta, tau*, tau**)`` is found by iterating the VAMP
state evolution map with damping.  Expectations over the spectrum and the
prior are sample averages; the Gaussian part is integrated in closed form
for the elastic-net family (or by common random numbers on request).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import ConvergenceWarning, InvalidInputError, NonConvergenceError
from .penalty import prox, prox_deriv_extended
from .spectral import empirical_r_transform

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass
class FixedPoint:
    gamma_star: float
    eta_star: float
    tau_star: float
    tau_dstar: float
    residuals: dict
    converged: bool
    iterations: int = 0

    def to_dict(self):
        return {
            "gamma_star": self.gamma_star,
            "eta_star": self.eta_star,
            "tau_star": self.tau_star,
            "tau_dstar": self.tau_dstar,
            "residuals": dict(self.residuals),
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _tail_moments(mu, s):
    # E[U^k 1{U > 0}] for U ~ N(mu, s^2), k = 0, 1, 2
    z = mu / s
    Phi = ndtr(z)
    phi = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    k0 = Phi
    k1 = mu * Phi + s * phi
    k2 = (mu * mu + s * s) * Phi + mu * s * phi
    return k0, k1, k2


def prox_moments(pen, gamma, tau, prior, z=None):
    """``(E Prox', E (Prox - B)^2)`` at ``Prox_{h / gamma}(B + sqrt(tau) Z)``.

    ``prior`` holds samples of ``B``.  Without ``z`` the expectation over
    ``Z`` is exact; with ``z`` (standard normal draws paired with ``prior``)
    it is the sample average.
    """
    v = 1.0 / gamma
    B = np.asarray(prior, dtype=np.float64)
    if z is not None:
        x = B + np.sqrt(tau) * z
        px = prox(pen, v, x)
        return float(np.mean(prox_deriv_extended(pen, v, x))), float(np.mean((px - B) ** 2))
    c = 1.0 / (1.0 + pen.lambda2 * v)
    t = pen.lambda1 * v
    s = np.sqrt(max(tau, 1e-300))
    with np.errstate(over="ignore", invalid="ignore"):
        a0, a1, a2 = _tail_moments(B - t, s)
        b0, b1, b2 = _tail_moments(-B - t, s)
    upper = c * c * a2 - 2 * c * B * a1 + B * B * a0
    lower = c * c * b2 + 2 * c * B * b1 + B * B * b0
    middle = B * B * np.clip(1.0 - a0 - b0, 0.0, 1.0)
    e1 = float(np.mean(upper + lower + middle))
    alpha = float(np.mean(c * (a0 + b0)))
    return alpha, e1


def _se_step(gamma, tau, pen, prior, d2, sigma2, z):
    alpha1, e1 = prox_moments(pen, gamma, tau, prior, z)
    if not alpha1 > 0:
        raise NonConvergenceError("state evolution left the domain: Prox' vanished")
    eta = gamma / alpha1
    g2 = eta - gamma
    if not g2 > 0:
        raise NonConvergenceError(f"domain violation: eta = {eta:.6g} <= gamma = {gamma:.6g}")
    tau2 = (e1 - alpha1**2 * tau) / (1 - alpha1) ** 2
    inv = 1.0 / (d2 + g2)
    alpha2 = g2 * float(np.mean(inv))
    eta2 = g2 / alpha2
    gamma_new = eta2 - g2
    e2 = float(np.mean((sigma2 * d2 + tau2 * g2 * g2) * inv * inv))
    tau_new = (e2 - alpha2**2 * tau2) / (1 - alpha2) ** 2
    return gamma_new, tau_new, eta, tau2


def fixed_point_residuals(gamma, eta, tau, tau2, pen, prior, d2, sigma2, z=None):
    """Relative residuals of the four fixed-point equations."""
    alpha1, e1 = prox_moments(pen, gamma, tau, prior, z)
    k = eta - gamma
    rb = (eta / k) ** 2 * (e1 - (gamma / eta) ** 2 * tau)
    try:
        rc = -empirical_r_transform(d2, 1.0 / eta)
    except InvalidInputError:
        rc = np.nan
    e2 = float(np.mean((sigma2 * d2 + tau2 * k * k) / (d2 + k) ** 2))
    rd = (eta / gamma) ** 2 * (e2 - (k / eta) ** 2 * tau2)
    return {
        "a": abs(gamma / eta - alpha1),
        "b": abs(tau2 - rb) / max(abs(tau2), 1e-300),
        "c": abs(gamma - rc) / gamma,
        "d": abs(tau - rd) / max(abs(tau), 1e-300),
    }


def solve_fixed_point(spectrum_samples, prior_samples, sigma2, pen, max_iter=500, damping=0.5,
                      tol=1e-10, gaussian="exact", n_mc=200_000, seed=0, init=None,
                      raise_on_failure=False):
    """Solve the population fixed-point system by damped state evolution.

    Parameters
    ----------
    spectrum_samples : array
        Draws (or quantiles) of the limiting eigenvalue law of ``X.T @ X``.
    prior_samples : array
        Draws from the coordinate law of the true signal.
    sigma2 : float
    pen : PenaltySpec
    damping : float
        Weight on the new iterate; halved whenever the step size grows.
    gaussian : {"exact", "monte_carlo"}
        Closed-form Gaussian integration, or ``n_mc`` common random normals
        paired with resampled prior draws.
    init : (gamma, tau), optional

    Returns
    -------
    FixedPoint
    """
    d2 = np.asarray(spectrum_samples, dtype=np.float64)
    prior = np.asarray(prior_samples, dtype=np.float64)
    if d2.size == 0 or not d2.mean() > 0:
        raise InvalidInputError("spectrum samples need a positive mean")
    if not np.all(np.isfinite(prior)):
        raise InvalidInputError("prior samples must be finite")
    z = None
    if gaussian == "monte_carlo":
        rng = np.random.default_rng(seed)
        prior = rng.choice(prior, size=n_mc, replace=True)
        z = rng.standard_normal(n_mc)
    elif gaussian != "exact":
        raise InvalidInputError("gaussian must be 'exact' or 'monte_carlo'")

    if init is None:
        gamma, tau = float(d2.mean()), float(np.mean(prior**2)) + sigma2
    else:
        gamma, tau = map(float, init)
    w = float(damping)
    last_step = np.inf
    converged = False
    eta = tau2 = np.nan
    it = 0
    for it in range(1, max_iter + 1):
        g_new, t_new, eta, tau2 = _se_step(gamma, tau, pen, prior, d2, sigma2, z)
        step = max(abs(g_new - gamma) / gamma, abs(t_new - tau) / max(tau, 1e-300))
        if step <= tol:
            gamma, tau = g_new, t_new
            converged = True
            break
        if step > last_step:
            w = max(0.5 * w, 1e-3)
        last_step = step
        gamma = (1 - w) * gamma + w * g_new
        tau = (1 - w) * tau + w * t_new
        if not (gamma > 0 and tau >= 0):
            raise NonConvergenceError("state evolution left the domain")

    _, _, eta, tau2 = _se_step(gamma, tau, pen, prior, d2, sigma2, z)
    res = fixed_point_residuals(gamma, eta, tau, tau2, pen, prior, d2, sigma2, z)
    if not converged:
        msg = f"fixed-point iteration did not converge in {max_iter} iterations"
        if raise_on_failure:
            raise NonConvergenceError(msg, residuals=res)
        warnings.warn(msg, ConvergenceWarning, stacklevel=2)
    return FixedPoint(float(gamma), float(eta), float(tau), float(tau2), res, converged, it)


@dataclass
class VampState:
    t: int
    x1: np.ndarray
    x2: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    gamma1: float = np.nan
    gamma2: float = np.nan
    diagnostics: dict = field(default_factory=dict)


def _ridge_solver(X, spectrum):
    if spectrum is not None:
        O, d2 = spectrum.O, spectrum.d2
    else:
        _, s, O = np.linalg.svd(X, full_matrices=True)
        d2 = np.zeros(X.shape[1])
        d2[: s.size] = s * s

    def solve(v, k):
        return O.T @ ((O @ v) / (d2 + k))

    return solve, d2


def _track(state, beta_hat, beta_star):
    p = state.x1.size
    if beta_hat is not None:
        state.diagnostics["mse_x1_beta_hat"] = float(np.sum((state.x1 - beta_hat) ** 2)) / p
        state.diagnostics["mse_x2_beta_hat"] = float(np.sum((state.x2 - beta_hat) ** 2)) / p
    if beta_star is not None:
        state.diagnostics["mse_x1_beta_star"] = float(np.sum((state.x1 - beta_star) ** 2)) / p
    return state


def oracle_vamp(X, y, beta_star, fp, pen, T, seed=0, r10=None, beta_hat=None, spectrum=None):
    """VAMP with the population ``(gamma*, eta*)`` held fixed.

    Initialised at ``r10 = beta_star + N(0, tau* I)`` unless ``r10`` is given.
    Returns the list of states for ``t = 1..T``.
    """
    gamma, eta = fp.gamma_star, fp.eta_star
    k = eta - gamma
    if not k > 0:
        raise InvalidInputError("oracle VAMP needs eta* > gamma*")
    X = np.asarray(X, dtype=np.float64)
    beta_star = np.asarray(beta_star, dtype=np.float64)
    if r10 is None:
        rng = np.random.default_rng(seed)
        r10 = beta_star + np.sqrt(fp.tau_star) * rng.standard_normal(beta_star.size)
    solve, _ = _ridge_solver(X, spectrum)
    Xty = X.T @ y
    r1 = np.array(r10, dtype=np.float64)
    out = []
    for t in range(1, T + 1):
        x1 = prox(pen, 1.0 / gamma, r1)
        r2 = (eta * x1 - gamma * r1) / k
        x2 = solve(Xty + k * r2, k)
        r1 = (eta * x2 - k * r2) / gamma
        out.append(_track(VampState(t, x1, x2, r1, r2, gamma, k), beta_hat, beta_star))
    return out


def data_vamp(X, y, pen, gamma10, r10, T, beta_hat=None, beta_star=None, spectrum=None):
    """Adaptive VAMP: the scalars are re-estimated from the iterates each step."""
    X = np.asarray(X, dtype=np.float64)
    solve, d2 = _ridge_solver(X, spectrum)
    p = X.shape[1]
    Xty = X.T @ y
    r1 = np.array(r10, dtype=np.float64)
    g1 = float(gamma10)
    out = []
    for t in range(1, T + 1):
        if not (np.isfinite(g1) and g1 > 0):
            raise NonConvergenceError(f"gamma_1 left (0, inf) at t = {t}: {g1}")
        v = 1.0 / g1
        x1 = prox(pen, v, r1)
        div = float(np.mean(prox_deriv_extended(pen, v, r1)))
        if div == 0:
            raise NonConvergenceError(f"prox divergence vanished at t = {t}")
        eta1 = g1 / div
        g2 = eta1 - g1
        if not g2 > 0:
            raise NonConvergenceError(f"gamma_2 left (0, inf) at t = {t}: {g2}")
        r2 = (eta1 * x1 - g1 * r1) / g2
        x2 = solve(Xty + g2 * r2, g2)
        eta2 = p / float(np.sum(1.0 / (d2 + g2)))
        g1_new = eta2 - g2
        r1 = (eta2 * x2 - g2 * r2) / g1_new
        out.append(_track(VampState(t, x1, x2, r1, r2, g1, g2), beta_hat, beta_star))
        g1 = g1_new
    return out
