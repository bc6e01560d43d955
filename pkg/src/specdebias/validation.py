"""Input validation helpers used by the functional API and the estimators."""

import numpy as np

from .errors import DimensionMismatchError, InvalidInputError


def check_design(X, name="X"):
    """Return ``X`` as a finite 2-D float64 array that is not identically zero."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if X.size == 0:
        raise InvalidInputError(f"{name} is empty")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    if not np.any(X):
        raise InvalidInputError(f"{name} is identically zero")
    return X


def check_response(y, n, name="y"):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2 and 1 in y.shape:
        y = y.ravel()
    if y.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-dimensional, got shape {y.shape}")
    if y.shape[0] != n:
        raise DimensionMismatchError(
            f"{name} has {y.shape[0]} entries but the design has {n} rows",
            expected=int(n), got=int(y.shape[0]),
        )
    if not np.all(np.isfinite(y)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return y


def check_coef(beta, p, name="beta"):
    beta = np.asarray(beta, dtype=np.float64).ravel()
    if beta.shape[0] != p:
        raise DimensionMismatchError(
            f"{name} has {beta.shape[0]} entries, expected {p}",
            expected=int(p), got=int(beta.shape[0]),
        )
    return beta


def check_positive(value, name, strict=True):
    value = float(value)
    if not np.isfinite(value) or value < 0 or (strict and value == 0):
        bound = "> 0" if strict else ">= 0"
        raise InvalidInputError(f"{name} must be finite and {bound}, got {value}")
    return value


def check_level(alpha, name="alpha"):
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"{name} must lie in (0, 1), got {alpha}")
    return alpha
