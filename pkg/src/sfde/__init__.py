"""Numerics for the space-time fractional diffusion equation with fractional noise."""

from .analysis import (EntropySequence, HolderFit, SmallBallEstimate, brownian_smallball_exact,
                       chung_lil_stat, cover_count_time, entropy_sequence, estimate_holder,
                       small_ball_mc, talagrand_lower_bound, uniform_modulus_stat)
from .covariance import (ConstantsReport, VariogramValue, compute_constants, conditional_variance,
                         cov_from_variogram, hardy_littlewood_check, slnd_probe,
                         v_increment_bound, v_increment_variance, variogram_full,
                         variogram_space, variogram_time)
from .errors import SfdeError
from .mlf import gamma_recip, mittag_leffler, ml_weighted_deriv, mlf_fourier_closed, p_hat
from .params import ModelParams, check_conditions, derive_exponents
from .sampling import FieldSample, GridSpec, sample_fbm_slice, sample_field_U, sample_field_u
from .solution import covariance_u, covariance_u_matrix
from .spectral import f_space, f_time, f_U, mu_density

__all__ = [
    "ConstantsReport", "EntropySequence", "FieldSample", "GridSpec", "HolderFit", "ModelParams",
    "SfdeError", "SmallBallEstimate", "VariogramValue", "brownian_smallball_exact",
    "check_conditions", "chung_lil_stat", "compute_constants", "conditional_variance",
    "cov_from_variogram", "covariance_u", "covariance_u_matrix", "cover_count_time",
    "derive_exponents", "entropy_sequence", "estimate_holder", "f_U", "f_space", "f_time",
    "gamma_recip", "hardy_littlewood_check", "mittag_leffler", "ml_weighted_deriv",
    "mlf_fourier_closed", "mu_density", "p_hat", "sample_fbm_slice", "sample_field_U",
    "sample_field_u", "slnd_probe", "small_ball_mc", "talagrand_lower_bound",
    "uniform_modulus_stat", "v_increment_bound", "v_increment_variance", "variogram_full",
    "variogram_space", "variogram_time",
]
__version__ = "0.1.0"
