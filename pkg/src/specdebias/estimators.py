"""scikit-learn compatible wrappers around the debiasing pipelines."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .debias import FEASIBILITY_TOL, debias
from .errors import DimensionMismatchError
from .fit import DEFAULT_MAX_ITER, DEFAULT_TOL, fit
from .inference import infer
from .pcr import debiased_pcr
from .penalty import PenaltySpec
from .spectral import decompose


def _penalty(value):
    if isinstance(value, PenaltySpec):
        return value
    return PenaltySpec.parse(value)


def _predict(est, X):
    check_is_fitted(est, "coef_")
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != est.n_features_in_:
        raise DimensionMismatchError(
            f"X has {X.shape[1]} features but the model was fitted with {est.n_features_in_}"
        )
    return X @ est.coef_


class SpectrumAwareDebiasedRegressor(BaseEstimator, RegressorMixin):
    """Penalised least squares followed by spectrum-aware debiasing.

    Parameters
    ----------
    penalty : str or PenaltySpec, default="en:1.0,0.1"
        ``"en:L1,L2"``, ``"ridge:L2"`` or ``"lasso:L1"``.
    sigma2 : float or None, default=None
        Known noise variance; estimated from the data when None.
    tol : float, default=1e-9
        KKT residual target of the penalised fit.
    max_iter : int, default=50000
    feasibility_tol : float, default=1e-6

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
        Debiased coefficients.
    beta_hat_ : ndarray of shape (n_features,)
        Penalised estimate before debiasing.
    adj_, eta_star_, tau_star_, tau_dstar_, sigma2_ : float
        Scalar statistics; ``tau_star_`` is the variance of each debiased
        coordinate.
    result_ : DebiasResult
    """

    def __init__(self, penalty="en:1.0,0.1", sigma2=None, tol=DEFAULT_TOL,
                 max_iter=DEFAULT_MAX_ITER, feasibility_tol=FEASIBILITY_TOL):
        self.penalty = penalty
        self.sigma2 = sigma2
        self.tol = tol
        self.max_iter = max_iter
        self.feasibility_tol = feasibility_tol

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        pen = _penalty(self.penalty)
        spec = decompose(X)
        fr = fit(X, y, pen, tol=self.tol, max_iter=self.max_iter, spectrum=spec)
        res = debias(X, y, fr, pen, sigma2=self.sigma2, spectrum=spec,
                     feasibility_tol=self.feasibility_tol)
        self.result_ = res
        self.fit_result_ = fr
        self.coef_ = res.beta_u
        self.beta_hat_ = res.beta_hat
        self.adj_ = res.adj
        self.eta_star_ = res.eta_star
        self.tau_star_ = res.tau_star
        self.tau_dstar_ = res.tau_dstar
        self.sigma2_ = res.sigma2
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        return _predict(self, X)

    def inference(self, alpha=0.05):
        """P-values, level-``alpha`` decisions and confidence intervals."""
        check_is_fitted(self, "coef_")
        return infer(self.coef_, self.tau_star_, alpha)

    def pvalues(self):
        return self.inference().pvalues

    def conf_int(self, alpha=0.05):
        return self.inference(alpha).intervals


class PCRSpectrumAwareRegressor(BaseEstimator, RegressorMixin):
    """Debiased principal components regression with an alignment test.

    Parameters
    ----------
    penalty : str or PenaltySpec, default="en:1.0,0.1"
        Penalty of the complement problem.
    J : str or sequence of int, default="top:20"
        Components estimated by ordinary PCR (0-based, decreasing eigenvalue).
    sigma2 : float or None, default=None
    q : float, default=0.1
        FDR level of the alignment test.
    method : {"SA", "DF"}, default="SA"
    rescale_complement : bool, default=True
    tol, max_iter, feasibility_tol : solver settings.

    Attributes
    ----------
    coef_ : ndarray
        Combined estimate ``beta_al + beta_co``.
    tau_star_ : float
    alignment_pvalues_ : ndarray
        One p-value per selected component.
    alignment_rejected_ : ndarray
        Component indices flagged as aligned with the signal.
    result_ : PcrResult
    """

    def __init__(self, penalty="en:1.0,0.1", J="top:20", sigma2=None, q=0.1, method="SA",
                 rescale_complement=True, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                 feasibility_tol=FEASIBILITY_TOL):
        self.penalty = penalty
        self.J = J
        self.sigma2 = sigma2
        self.q = q
        self.method = method
        self.rescale_complement = rescale_complement
        self.tol = tol
        self.max_iter = max_iter
        self.feasibility_tol = feasibility_tol

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        res = debiased_pcr(X, y, self.J, _penalty(self.penalty), sigma2=self.sigma2, q=self.q,
                           tol=self.tol, max_iter=self.max_iter,
                           feasibility_tol=self.feasibility_tol, method=self.method,
                           rescale=self.rescale_complement)
        self.result_ = res
        self.coef_ = res.beta_pcr
        self.tau_star_ = res.tau_star
        self.components_ = res.J
        self.alignment_pvalues_ = res.align_pvalues
        self.alignment_rejected_ = res.J[res.bh_rejected]
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        return _predict(self, X)

    def inference(self, alpha=0.05):
        check_is_fitted(self, "coef_")
        return infer(self.coef_, self.tau_star_, alpha)
