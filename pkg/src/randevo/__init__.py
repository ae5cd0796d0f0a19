"""Asymptotic expansion of diffusion-scaled Markov random evolutions.

Chain algebra, exact exponential-polynomial expansion terms, and two
independent ground truths (per-mode matrix exponential and Monte Carlo).
"""
__version__ = "0.1.0"

from .markov import (  # noqa: E402
    ChainAlgebra,
    ChainModel,
    MarkovChainAlgebra,
    balance_check,
    chain_algebra,
    deviation_matrix,
    diffusion_tensor,
    exp0,
    resolvent,
    stationary_distribution,
    validate_model,
)
from .spectral import EPFunction, ModeGrid, StateField, TestFunction  # noqa: E402
from .expansion import AsymptoticExpansion, build_expansion, truncated_solution  # noqa: E402
from .evolution import exact_solution, mc_estimate, remainder_bound, residual  # noqa: E402
from .models import builtin_model  # noqa: E402
from .tolerances import DEFAULT_TOLERANCES, Tolerances  # noqa: E402

__all__ = [
    "AsymptoticExpansion", "ChainAlgebra", "ChainModel", "DEFAULT_TOLERANCES", "EPFunction",
    "MarkovChainAlgebra", "ModeGrid", "StateField", "TestFunction",
    "balance_check", "build_expansion", "builtin_model", "chain_algebra",
    "deviation_matrix", "diffusion_tensor", "exact_solution", "exp0",
    "mc_estimate", "remainder_bound", "residual", "resolvent",
    "Tolerances", "stationary_distribution", "truncated_solution", "validate_model",
]
