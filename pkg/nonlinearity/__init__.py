"""Diffusion nonlinearities a(A) = K(A) A, their growth parameters and diagnostics."""

from nonlinearity.growth import GrowthParams, example2_growth_params
from nonlinearity.registry import (
    NONLINEARITIES,
    Nonlinearity,
    a_eval,
    becu_stability,
    example2_K,
    get_nonlinearity,
    power_law,
    register_nonlinearity,
)
from nonlinearity.diagnostics import (
    check_growth,
    coercivity_profile,
    estimate_er_norm,
    estimate_lipschitz,
    monotonicity_indicator,
    uncovered_fraction,
)

__all__ = [
    "GrowthParams", "example2_growth_params", "NONLINEARITIES", "Nonlinearity",
    "a_eval", "becu_stability", "example2_K", "get_nonlinearity", "power_law",
    "register_nonlinearity", "check_growth", "coercivity_profile",
    "estimate_er_norm", "estimate_lipschitz", "monotonicity_indicator",
    "uncovered_fraction",
]
