"""Exception taxonomy shared by the library and the command line."""


class SpectrumDebiasError(Exception):
    """Base class; ``code`` is the stable machine-readable identifier."""

    code = "ERROR"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"code": self.code, "message": str(self)}
        if self.details:
            out["details"] = self.details
        return out


class CertificateError(SpectrumDebiasError, ValueError):
    """The adjustment equation has no unique positive root."""

    code = "CERTIFICATE_FAILED"


class FeasibilityError(SpectrumDebiasError, ValueError):
    """The noise level cannot be estimated from this spectrum."""

    code = "FEASIBILITY_FAILED"


class NonConvergenceError(SpectrumDebiasError, RuntimeError):
    code = "NONCONVERGENCE"


class DimensionMismatchError(SpectrumDebiasError, ValueError):
    code = "DIM_MISMATCH"


class InputIOError(SpectrumDebiasError, OSError):
    code = "IO"


class InvalidInputError(SpectrumDebiasError, ValueError):
    code = "INVALID_INPUT"


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped before reaching its tolerance."""
