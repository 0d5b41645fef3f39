"""Spatial max-mixture processes: simulation, F^lambda-madograms and selection of the mixing coefficient."""

__version__ = "0.1.0"

from .depmeasures import (
    chi_chibar_empirical,
    flambda_integral_oracle,
    flambda_madogram_empirical,
    flambda_mm_theoretical,
    fmadogram_empirical,
    theta_from_fmadogram,
)
from .estimate import NlsConfig, dc_criterion, mse_rel, nls_fit_theta, select_a, window_average
from .models import TEG, BrownResnick, ExponentialCorrelation, ExtremalT, MaxMixture, PowerVariogram, Smith
from .predict import conditional_exceedance_empirical, conditional_exceedance_mm
from .simulate import FieldSample, sample_gaussian, simulate_inverted, simulate_max_mixture, simulate_max_stable
from .spatial import InvalidInput, SiteSet, bin_lags, pairwise_lags

__all__ = [
    "BrownResnick", "ExponentialCorrelation", "ExtremalT", "FieldSample", "InvalidInput", "MaxMixture",
    "NlsConfig", "PowerVariogram", "SiteSet", "Smith", "TEG", "bin_lags", "chi_chibar_empirical",
    "conditional_exceedance_empirical", "conditional_exceedance_mm", "dc_criterion",
    "flambda_integral_oracle", "flambda_madogram_empirical", "flambda_mm_theoretical",
    "fmadogram_empirical", "mse_rel", "nls_fit_theta", "pairwise_lags", "sample_gaussian",
    "select_a", "simulate_inverted", "simulate_max_mixture", "simulate_max_stable",
    "theta_from_fmadogram", "window_average",
]
