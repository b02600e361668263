"""Extreme learning machines on hidden-layer concatenated networks for PDEs."""

from .lstsq import NlsqOptions, SolverError, gauss_newton_trust_region, linear_least_squares
from .netcore import (CONVENTIONAL, HLCONC, NetworkCoefficients, append_hidden_layer,
                      assign_random_coefficients, evaluate_basis, extend_coefficient_vector,
                      widen_hidden_layer)
from .pdespec import BoundaryCondition, ProblemSpec, build_collocation
from .problems import exact_solution, get_problem
from .solver import (DecompositionSpec, SolveReport, block_time_march, evaluate_errors,
                     solve_decomposed, solve_single)

__version__ = "0.1.0"
