"""Spectrum-aware debiasing for penalised linear regression."""

from .adjust import AdjustmentProblem, g_p, solve_adjustment
from .debias import DebiasResult, debias, df_debias
from .errors import (CertificateError, ConvergenceWarning, DimensionMismatchError,
                     FeasibilityError, InputIOError, InvalidInputError, NonConvergenceError,
                     SpectrumDebiasError)
from .estimators import PCRSpectrumAwareRegressor, SpectrumAwareDebiasedRegressor
from .fit import FitResult, fit
from .inference import InferenceReport, benjamini_hochberg, confidence_intervals, infer, p_values
from .pcr import PcrResult, debiased_pcr
from .penalty import PenaltySpec
from .spectral import DesignSpectrum, decompose, rescale_unit_mean_eig
from .vamp import FixedPoint, solve_fixed_point

__version__ = "0.1.0"

__all__ = [
    "AdjustmentProblem", "g_p", "solve_adjustment",
    "DebiasResult", "debias", "df_debias",
    "CertificateError", "ConvergenceWarning", "DimensionMismatchError", "FeasibilityError",
    "InputIOError", "InvalidInputError", "NonConvergenceError", "SpectrumDebiasError",
    "PCRSpectrumAwareRegressor", "SpectrumAwareDebiasedRegressor",
    "FitResult", "fit",
    "InferenceReport", "benjamini_hochberg", "confidence_intervals", "infer", "p_values",
    "PcrResult", "debiased_pcr",
    "PenaltySpec",
    "DesignSpectrum", "decompose", "rescale_unit_mean_eig",
    "FixedPoint", "solve_fixed_point",
]
