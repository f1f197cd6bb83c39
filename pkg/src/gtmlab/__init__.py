"""Trace maps, spectral bands and separating nested structures for
Schroedinger operators with generalized Thue-Morse potential."""

from .bands import Band, BandSet, InclusionReport, isolate_bands, monotone_preimage, probe_inclusion, sample_curve
from .bounds import DimensionReport, gamma_m, lambda_m, theorem_bound, verify_gamma_recursion
from .chebyshev import Mat2, cheb_deriv, cheb_eval, sl2_pow
from .errors import (
    BandCountError,
    ConfigError,
    GTMError,
    InvariantViolation,
    NotUnimodularError,
    OracleCapExceeded,
    PrecisionExhaustedError,
)
from .estimators import BandIsolator, SNSDimensionEstimator, TraceMapTransformer
from .sns import SNSNode, SNSTree, build_sns, dim_lower_estimate, sns_root, sns_stats
from .tracemap import (
    ModelParams,
    TraceJet,
    initial_jet,
    matrix_oracle,
    step_jet,
    substitution_word,
    trace_eval,
    word_oracle,
)

__version__ = "0.1.0"
