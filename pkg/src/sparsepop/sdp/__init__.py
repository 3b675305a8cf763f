"""Semidefinite solving, SDPA interchange and certificate checks."""
from .ipm import SDPSolution, SolverConfig, solve_internal

__all__ = ["SDPSolution", "SolverConfig", "solve_internal"]
