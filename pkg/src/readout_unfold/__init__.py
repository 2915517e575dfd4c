"""Readout-noise unfolding for quantum-computer count histograms."""

__version__ = "0.1.0"

from .core import ResponseMatrix, fold, parse_bitstring, state_bitstring, validate_response
from .errors import NumericalError, UnfoldingError, ValidationError
from .noisefit import conditioned_transitions, exponent_counts, fit_global, fit_per_qubit
from .response import (
    CalibrationData,
    NoiseModel,
    build_from_calibration,
    from_noise_model,
    simulate_calibration,
    tridiagonal_example,
    two_level_example,
)
from .sim import (
    TruthSpec,
    apply_readout_noise,
    binned_gaussian_truth,
    gaussian_truth,
    mse,
    pseudo_experiments,
    sample_counts,
    w_state_truth,
)
from .uncertainty import (
    UncertaintyReport,
    bias_scan,
    bootstrap_measurement,
    bootstrap_response,
    nonclosure,
    perturbed_response,
    systematic_response,
    uncertainty_scan,
)
from .unfold import UnfoldConfig, UnfoldResult, ibu_path, unfold, unfold_ibu, unfold_inversion, unfold_least_squares

__all__ = [
    "CalibrationData",
    "NoiseModel",
    "NumericalError",
    "ResponseMatrix",
    "TruthSpec",
    "UncertaintyReport",
    "UnfoldConfig",
    "UnfoldResult",
    "UnfoldingError",
    "ValidationError",
    "apply_readout_noise",
    "bias_scan",
    "binned_gaussian_truth",
    "bootstrap_measurement",
    "bootstrap_response",
    "build_from_calibration",
    "conditioned_transitions",
    "exponent_counts",
    "fit_global",
    "fit_per_qubit",
    "fold",
    "from_noise_model",
    "gaussian_truth",
    "ibu_path",
    "mse",
    "nonclosure",
    "parse_bitstring",
    "perturbed_response",
    "pseudo_experiments",
    "sample_counts",
    "simulate_calibration",
    "state_bitstring",
    "systematic_response",
    "tridiagonal_example",
    "two_level_example",
    "uncertainty_scan",
    "unfold",
    "unfold_ibu",
    "unfold_inversion",
    "unfold_least_squares",
    "validate_response",
    "w_state_truth",
]
