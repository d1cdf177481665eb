"""Type-II Bayesian source reconstruction with Kronecker-separable
spatio-temporal covariances.

Solvers: :func:`fit_full` (unstructured temporal covariance),
:func:`fit_thin` (Toeplitz temporal covariance via circulant embedding) and
:func:`fit_champagne` (white temporal baseline).
"""
from .metrics import emd, nmse, similarity_error, source_power, tce
from .model import FitResult, SpatialParams, naive_posterior_mean, nll_kron, nll_smv, posterior_mean, sigma_y
from .simgen import SimConfig, gen_lead_field_synthetic, simulate_ar_dataset, simulate_kron_dataset, snr_from_alpha
from .solver_baseline import fit_champagne
from .solver_full import FitConfig, fit_full
from .solver_thin import CirculantBasis, efficient_posterior_mean, fit_thin

__version__ = "0.1.0"

__all__ = [
    "CirculantBasis",
    "FitConfig",
    "FitResult",
    "SimConfig",
    "SpatialParams",
    "efficient_posterior_mean",
    "emd",
    "fit_champagne",
    "fit_full",
    "fit_thin",
    "gen_lead_field_synthetic",
    "naive_posterior_mean",
    "nll_kron",
    "nll_smv",
    "nmse",
    "posterior_mean",
    "sigma_y",
    "similarity_error",
    "simulate_ar_dataset",
    "simulate_kron_dataset",
    "snr_from_alpha",
    "source_power",
    "tce",
]
