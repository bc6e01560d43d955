"""Separable elastic-net family penalties ``h(x) = l1 |x| + (l2 / 2) x^2``."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class PenaltySpec:
    """Elastic-net family penalty applied coordinate-wise.

    Ridge is ``lambda1 == 0`` and Lasso is ``lambda2 == 0``.
    """

    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        l1, l2 = float(self.lambda1), float(self.lambda2)
        if not (np.isfinite(l1) and np.isfinite(l2)) or l1 < 0 or l2 < 0:
            raise InvalidInputError("penalty parameters must be finite and non-negative")
        if l1 == 0 and l2 == 0:
            raise InvalidInputError("at least one penalty parameter must be positive")
        object.__setattr__(self, "lambda1", l1)
        object.__setattr__(self, "lambda2", l2)

    @classmethod
    def ridge(cls, lambda2):
        return cls(0.0, lambda2)

    @classmethod
    def lasso(cls, lambda1):
        return cls(lambda1, 0.0)

    @classmethod
    def elastic_net(cls, lambda1, lambda2):
        return cls(lambda1, lambda2)

    @classmethod
    def parse(cls, text):
        """Parse ``"en:1.0,0.1"``, ``"ridge:0.5"`` or ``"lasso:1.0"``."""
        try:
            kind, _, args = str(text).strip().partition(":")
            vals = [float(a) for a in args.split(",")] if args else []
        except ValueError as exc:
            raise InvalidInputError(f"cannot parse penalty {text!r}") from exc
        kind = kind.lower()
        if kind in ("en", "elastic_net", "elasticnet") and len(vals) == 2:
            return cls(vals[0], vals[1])
        if kind == "ridge" and len(vals) == 1:
            return cls(0.0, vals[0])
        if kind == "lasso" and len(vals) == 1:
            return cls(vals[0], 0.0)
        raise InvalidInputError(
            f"cannot parse penalty {text!r}; expected en:L1,L2, ridge:L2 or lasso:L1"
        )

    @property
    def kind(self):
        if self.lambda1 == 0:
            return "ridge"
        if self.lambda2 == 0:
            return "lasso"
        return "elastic_net"

    @property
    def c0(self):
        """Strong-convexity constant."""
        return self.lambda2

    def __str__(self):
        if self.kind == "ridge":
            return f"ridge:{self.lambda2:g}"
        if self.kind == "lasso":
            return f"lasso:{self.lambda1:g}"
        return f"en:{self.lambda1:g},{self.lambda2:g}"

    def to_dict(self):
        return {"kind": self.kind, "lambda1": self.lambda1, "lambda2": self.lambda2}

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return float(np.sum(self.lambda1 * np.abs(x) + 0.5 * self.lambda2 * x * x))

    def prox(self, v, x):
        return prox(self, v, x)

    def hpp(self, x):
        return hpp_extended(self, x)

    def prox_deriv(self, v, x):
        return prox_deriv_extended(self, v, x)


def _check_v(v):
    if not np.all(np.asarray(v) > 0):
        raise InvalidInputError("prox parameter v must be positive")


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def prox(pen, v, x):
    """``Prox_{v h}(x) = ST_{l1 v}(x) / (1 + l2 v)``, elementwise."""
    _check_v(v)
    xa = np.asarray(x, dtype=np.float64)
    t = pen.lambda1 * v
    st = np.sign(xa) * np.maximum(np.abs(xa) - t, 0.0)
    return _out(st / (1.0 + pen.lambda2 * v), x)


def hpp_extended(pen, x):
    """Second derivative of ``h`` extended by ``+inf`` at the kink ``x = 0``."""
    xa = np.asarray(x, dtype=np.float64)
    if pen.lambda1 == 0:
        out = np.full(xa.shape, pen.lambda2)
    else:
        out = np.where(xa == 0.0, np.inf, pen.lambda2)
    return _out(out, x)


def prox_deriv_extended(pen, v, x):
    """Derivative of ``Prox_{v h}`` extended to the threshold points.

    Equals ``1 / (1 + v * hpp_extended(prox(x)))`` with ``1 / inf = 0``.
    """
    _check_v(v)
    xa = np.asarray(x, dtype=np.float64)
    base = 1.0 / (1.0 + pen.lambda2 * v)
    if pen.lambda1 == 0:
        out = np.full(xa.shape, base)
    else:
        # |x| - t > 0 has the same sign in floating point as |x| > t, which
        # keeps this consistent with prox() returning an exact zero
        out = np.where(np.abs(xa) - pen.lambda1 * v > 0.0, base, 0.0)
    return _out(out, x)
