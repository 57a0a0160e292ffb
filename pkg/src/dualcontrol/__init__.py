"""Dual-control approximation of dynamic asset allocation with unhedgeable
inflation risk.

The dual side restricts the shadow price of the unhedgeable driver to a
constant, which gives closed-form controls and an upper bound on the value
function.  The primal side projects the implied strategy onto the traded
assets, simulates it, and yields a Monte Carlo lower bound.
"""

from .dual import Controls, KernelMoments, kernel_moments, solve_dual, upper_bound, x_gamma
from .diagnostics import BoundsReport, allocation_curve, annual_loss, compensating_variation, duality_gap, kde
from .errors import (
    BracketError,
    ConfigError,
    DomainError,
    DualControlError,
    NegativeVariance,
    NoConvergence,
    NotPositiveSemiDefinite,
    SingularSigma,
)
from .market import MarketParams, PathSet, SimConfig, correlation_factor, nominal_rate, sigma_matrix, simulate_states
from .preferences import DualCrraPrefs, conjugate, inverse_marginal, marginal_utility, rra_reciprocal, utility
from .primal import (
    LowerBoundEstimate,
    WealthSample,
    lower_bound,
    market_value_wealth,
    optimize_primal,
    portfolio_weights,
    simulate_wealth,
)

__version__ = "0.1.0"

__all__ = [
    "BoundsReport", "BracketError", "ConfigError", "Controls", "DomainError", "DualControlError",
    "DualCrraPrefs", "KernelMoments", "LowerBoundEstimate", "MarketParams", "NegativeVariance",
    "NoConvergence", "NotPositiveSemiDefinite", "PathSet", "SimConfig", "SingularSigma",
    "WealthSample", "allocation_curve", "annual_loss", "compensating_variation", "conjugate",
    "correlation_factor", "duality_gap", "inverse_marginal", "kde", "kernel_moments",
    "lower_bound", "marginal_utility", "market_value_wealth", "nominal_rate", "optimize_primal",
    "portfolio_weights", "rra_reciprocal", "sigma_matrix", "simulate_states", "simulate_wealth",
    "solve_dual", "upper_bound", "utility", "x_gamma",
]
