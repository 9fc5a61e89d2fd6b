"""Trimmed stable subordinators and the PD(alpha, r) family: samplers, densities, checks."""

from .densities import GrDensity, GrFamily, JointEval, k_n
from .errors import (
    DomainError,
    FitError,
    InsufficientEnumerationError,
    NumericalError,
    RangeError,
    TrimmedPDError,
)
from .fit import FitResult, RankedData, fit_alpha_given_r, goodness_report, select_r
from .levy import OrderedJumpSet, PdSample, StableParams, pd_sample, sample_ordered_jumps, trimmed_sum
from .nbproc import NBParams, PointMeasure, sample_nb, total_mass
from .sizebias import SizeBiasedDraw, markov_chain_sampler, size_biased_permutation, stick_reconstruct
from .streams import stream
from .verify import VerificationReport, VerifyConfig, verify_all

__all__ = [
    "DomainError", "FitError", "FitResult", "GrDensity", "GrFamily", "InsufficientEnumerationError",
    "JointEval", "NBParams", "NumericalError", "OrderedJumpSet", "PdSample", "PointMeasure", "RangeError",
    "RankedData", "SizeBiasedDraw", "StableParams", "TrimmedPDError", "VerificationReport", "VerifyConfig",
    "fit_alpha_given_r", "goodness_report", "k_n", "markov_chain_sampler", "pd_sample", "sample_nb",
    "sample_ordered_jumps", "select_r", "size_biased_permutation", "stick_reconstruct", "stream",
    "total_mass", "trimmed_sum", "verify_all",
]
