"""Photon-pair emission from an ac-biased tunnel junction.

Analytic model of the photo-assisted current noise and the two-frequency
pair correlator, a Monte Carlo simulator of the two-band power-detection
chain, setup calibration from photo-assisted noise curves, and a CLI for
sweeps over bias conditions.
"""

from __future__ import annotations

from .calibration import CalibrationModel, FitReport, NoiseCurve, fit, forward_model
from .detection import (
    ChainPrediction,
    McConfig,
    McResult,
    MomentAccumulator,
    SpurCorrection,
    apply_crosstalk,
    calibrate_spur,
    detect_power,
    estimate_g2,
    expected_g2,
    predict_chain,
    run_experiment,
    synthesize_envelopes,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    EvaluationError,
    IdentifiabilityError,
    InputError,
    ModelValidityWarning,
    ModelViolationError,
    NumericalConsistencyError,
    PairNoiseError,
    SchemaError,
    UndefinedStatisticError,
)
from .junction import (
    POLICY_AVERAGE,
    POLICY_CENTER,
    DetectionBand,
    Drive,
    Junction,
    PairStats,
    bose_einstein,
    c4,
    g2,
    g2_kelvin2,
    intrinsic_c4_estimate,
    nrf,
    pair_probability,
    pair_rate,
    pair_stats,
    photo_assisted_s,
    photon_number,
    s0_equilibrium,
    x_correlator,
)
from .special import (
    CONSTANTS,
    PhysicalConstants,
    band_average,
    bessel_j,
    coth_stable,
    truncation_order,
)
from .sweep import SweepSpec, run_sweep

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # constants & special functions
    "CONSTANTS",
    "PhysicalConstants",
    "band_average",
    "bessel_j",
    "coth_stable",
    "truncation_order",
    # junction noise model
    "POLICY_AVERAGE",
    "POLICY_CENTER",
    "DetectionBand",
    "Drive",
    "Junction",
    "PairStats",
    "bose_einstein",
    "c4",
    "g2",
    "g2_kelvin2",
    "intrinsic_c4_estimate",
    "nrf",
    "pair_probability",
    "pair_rate",
    "pair_stats",
    "photo_assisted_s",
    "photon_number",
    "s0_equilibrium",
    "x_correlator",
    # detection-chain Monte Carlo
    "ChainPrediction",
    "McConfig",
    "McResult",
    "MomentAccumulator",
    "SpurCorrection",
    "apply_crosstalk",
    "calibrate_spur",
    "detect_power",
    "estimate_g2",
    "expected_g2",
    "predict_chain",
    "run_experiment",
    "synthesize_envelopes",
    # calibration
    "CalibrationModel",
    "FitReport",
    "NoiseCurve",
    "fit",
    "forward_model",
    # sweeps
    "SweepSpec",
    "run_sweep",
    # errors
    "PairNoiseError",
    "ConfigError",
    "SchemaError",
    "DomainError",
    "EvaluationError",
    "UndefinedStatisticError",
    "NumericalConsistencyError",
    "ModelViolationError",
    "InputError",
    "ConvergenceError",
    "IdentifiabilityError",
    "ModelValidityWarning",
]
