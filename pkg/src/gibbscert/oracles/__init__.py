"""Independent ground-truth computations used to validate every bound."""

from .gaussian import GaussianModel, gaussian_exact_covariance, gaussian_from_model
from .mcmc import ChainEstimate, SamplerConfig, mcmc_covariance_matrix, mcmc_estimate_covariance
from .potential import (
    GridSpec,
    PotentialField,
    solve_potential,
    verify_core_identity,
    verify_directional_pi,
    verify_dual_pi,
)

__all__ = [
    "GaussianModel",
    "gaussian_exact_covariance",
    "gaussian_from_model",
    "ChainEstimate",
    "SamplerConfig",
    "mcmc_covariance_matrix",
    "mcmc_estimate_covariance",
    "GridSpec",
    "PotentialField",
    "solve_potential",
    "verify_core_identity",
    "verify_directional_pi",
    "verify_dual_pi",
]
