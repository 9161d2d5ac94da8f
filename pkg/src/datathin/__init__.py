"""Split one draw from a known family into independent folds that add back up."""

from .distributions import DistributionSpec, Family, Theta, cdf, log_density, sample
from .errors import ThinningError, UnsupportedFamily
from .folds import FoldSet, Mode, Recombiner, ThinningPlan, recombine
from .mcmc import GaussianRandomWalk, McmcConfig, UniformBox, metropolis_sample
from .rng import RngState
from .thinners import (
    IMPOSSIBLE,
    gaussian_uv_decompose,
    supported_modes,
    thin,
    thin_beta,
    thin_convolution,
    thin_gamma_shape,
    thin_max,
    thin_mean_variance,
    thin_min,
    thin_sphere,
    thin_split,
    thin_transformed,
    thin_weibull,
)
from .verify import VerificationReport, fisher_additivity_check, run_verification

__version__ = "0.1.0"

__all__ = [
    "DistributionSpec",
    "Family",
    "Theta",
    "sample",
    "log_density",
    "cdf",
    "ThinningError",
    "UnsupportedFamily",
    "FoldSet",
    "Mode",
    "Recombiner",
    "ThinningPlan",
    "recombine",
    "GaussianRandomWalk",
    "McmcConfig",
    "UniformBox",
    "metropolis_sample",
    "RngState",
    "IMPOSSIBLE",
    "gaussian_uv_decompose",
    "supported_modes",
    "thin",
    "thin_beta",
    "thin_convolution",
    "thin_gamma_shape",
    "thin_max",
    "thin_mean_variance",
    "thin_min",
    "thin_sphere",
    "thin_split",
    "thin_transformed",
    "thin_weibull",
    "VerificationReport",
    "fisher_additivity_check",
    "run_verification",
]
