"""Monte Carlo and quadrature tools for Fourier coefficients of multiplicative chaos.

Submodules
----------
kernels    seed kernels and the scale covariance ``K_t``
field      layered log-correlated field sampler on the discrete circle
gmc        chaos measures, barriers and the good event
fourier    Fourier coefficients, second-moment oracle, region split
twopoint   two-point auxiliary function, its bound and helpers
brownian   barrier and ballot probabilities for Brownian motion
harness    experiments and their CSV/JSON outputs
cli        the ``gmcf`` command
"""

from .exceptions import (
    ConfigError,
    GmcfError,
    PositiveDefinitenessError,
    QuadratureError,
    ResolutionError,
    UndefinedSlopeError,
)
from .field import StarScaleField, TimeGrid, SpatialGrid, sample_field, sample_two_point
from .fourier import FourierTransformer, exact_second_moment, fourier_coeffs, region_contributions
from .gmc import (
    GmcParams,
    GmcTransformer,
    GoodEventParams,
    U_of_t,
    gmc_weights,
    good_event,
    good_set_mask,
    m_of_t,
    restricted_measure,
)
from .harness import ExperimentConfig, fit_log_slope, run_tightness_experiment
from .kernels import BSPLINE3, TRIANGLE, K_eval, K_layer, K_prime, ScaleCovariance, k_eval
from .twopoint import FBoundCalibrator, estimate_F

__version__ = "0.1.0"

__all__ = [
    "BSPLINE3", "TRIANGLE", "ScaleCovariance", "k_eval", "K_eval", "K_layer", "K_prime",
    "StarScaleField", "TimeGrid", "SpatialGrid", "sample_field", "sample_two_point",
    "GmcParams", "GoodEventParams", "GmcTransformer", "gmc_weights", "good_set_mask",
    "good_event", "restricted_measure", "m_of_t", "U_of_t",
    "FourierTransformer", "fourier_coeffs", "exact_second_moment", "region_contributions",
    "estimate_F", "FBoundCalibrator",
    "ExperimentConfig", "run_tightness_experiment", "fit_log_slope",
    "GmcfError", "QuadratureError", "PositiveDefinitenessError", "ResolutionError",
    "ConfigError", "UndefinedSlopeError",
]
