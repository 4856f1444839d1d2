"""Gridless direction-of-arrival estimation by sparse and parametric covariance fitting.

The main entry points are :func:`spa_estimate` (snapshots in, frequencies and
powers out) and the sklearn-style :class:`SPA` estimator. Frequencies live on
``[0, 1)``; :func:`frequency_to_direction` converts them to angles.
"""

from .array_model import (
    ArrayGeometry,
    circular_distance,
    coarray,
    direction_to_frequency,
    frequency_to_direction,
    is_redundancy_array,
    max_detectable_sources,
    selection_matrix,
    steering_matrix,
    steering_vector,
)
from .baselines import Grid, Spectrum, SpiceResult, iaa, music, peak_pick, spice, spice_pp
from .estimators import IAA, MUSIC, SPA, SPICE, SPICEPP
from .metrics import (
    TrialResult,
    crlb_stochastic,
    fisher_information,
    grid_lower_bound,
    mse_frequency,
    top_k,
)
from .signal_sim import (
    NoiseSpec,
    SourceScene,
    generate_snapshots,
    make_rng,
    sample_covariance,
    snr_to_sigma,
    true_covariance,
)
from .spa import (
    CovarianceFit,
    EstimationError,
    ParamEstimate,
    RetrievalError,
    estimate_from_fit,
    fit_covariance,
    fit_single_snapshot,
    postprocess,
    spa_estimate,
    spa_estimate_covariance,
    toeplitz,
    toeplitz_param,
    vandermonde_decompose,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry", "circular_distance", "coarray", "direction_to_frequency",
    "frequency_to_direction", "is_redundancy_array", "max_detectable_sources",
    "selection_matrix", "steering_matrix", "steering_vector",
    "Grid", "Spectrum", "SpiceResult", "iaa", "music", "peak_pick", "spice", "spice_pp",
    "IAA", "MUSIC", "SPA", "SPICE", "SPICEPP",
    "TrialResult", "crlb_stochastic", "fisher_information", "grid_lower_bound",
    "mse_frequency", "top_k",
    "NoiseSpec", "SourceScene", "generate_snapshots", "make_rng", "sample_covariance",
    "snr_to_sigma", "true_covariance",
    "CovarianceFit", "EstimationError", "ParamEstimate", "RetrievalError",
    "estimate_from_fit", "fit_covariance", "fit_single_snapshot", "postprocess",
    "spa_estimate", "spa_estimate_covariance", "toeplitz", "toeplitz_param",
    "vandermonde_decompose",
]
