"""Diffusions under volatility uncertainty: simulation, hypothesis checking,
and a worst-case PDE semigroup, cross-validated against each other."""

from .conditions import CheckReport, SearchDomain, run_check
from .functions import TestFunction
from .gfunction import CovarianceSet, SymMatrix, argmax_sigma, eval_G, nondegeneracy_bound
from .generator import eval_generator, generator_limit_check
from .pde import Grid, PDESolution, dominance_check, monotonicity_check, semigroup_value, solve
from .scenario import (
    GBrownianPath,
    NoisePath,
    VolatilityControl,
    build_gbm_path,
    estimate_sublinear_expectation,
    sample_noise,
)
from .sde import CoefficientSet, StatePath, integrate, integrate_coupled, pathwise_min_gap

__version__ = "0.1.0"

__all__ = [
    "CheckReport",
    "SearchDomain",
    "CoefficientSet",
    "CovarianceSet",
    "GBrownianPath",
    "Grid",
    "NoisePath",
    "PDESolution",
    "StatePath",
    "SymMatrix",
    "TestFunction",
    "VolatilityControl",
    "argmax_sigma",
    "build_gbm_path",
    "dominance_check",
    "estimate_sublinear_expectation",
    "eval_G",
    "eval_generator",
    "generator_limit_check",
    "integrate",
    "integrate_coupled",
    "monotonicity_check",
    "nondegeneracy_bound",
    "pathwise_min_gap",
    "run_check",
    "sample_noise",
    "semigroup_value",
    "solve",
]
