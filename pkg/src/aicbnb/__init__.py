"""Exact AIC best-subset selection for linear regression by branch-and-bound."""

__version__ = "0.1.0"

from .bnb import SolveReport, SolverConfig, solve
from .data import Dataset, build_gram, find_dependencies, from_arrays, load_csv, standardize
from .ols import enumerate_all, full_aic, objective, solve_subset

__all__ = [
    "Dataset",
    "SolveReport",
    "SolverConfig",
    "build_gram",
    "enumerate_all",
    "find_dependencies",
    "from_arrays",
    "full_aic",
    "load_csv",
    "objective",
    "solve",
    "solve_subset",
    "standardize",
]
