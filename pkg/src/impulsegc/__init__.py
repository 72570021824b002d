"""Impulsive optimal control by graph completion and consistent approximations."""
from .estimator import ImpulsiveControlSolver
from .graphc import GraphCompletion, build, pi_map, push_forward
from .measure import Atom, AtomProfile, PiecewiseLinearMeasure, VectorMeasure, approximate
from .metrics import DecisionPoint, PiecewiseConstant, d_full, dbar, hausdorff
from .model import (
    ConfigError,
    InvalidField,
    InvalidProblem,
    ProblemSpec,
    estimate_constants,
    load_problem,
    problem_from_dict,
    validate,
)
from .opt import DecisionVector, SolverOptions, error_bound_report, solve_level, study
from .sim import euler_solve, reference_solve

__version__ = "0.1.0"

__all__ = [
    "Atom", "AtomProfile", "ConfigError", "DecisionPoint", "DecisionVector", "GraphCompletion",
    "ImpulsiveControlSolver", "InvalidField", "InvalidProblem", "PiecewiseConstant",
    "PiecewiseLinearMeasure", "ProblemSpec", "SolverOptions", "VectorMeasure", "approximate",
    "build", "d_full", "dbar", "error_bound_report", "estimate_constants", "euler_solve",
    "hausdorff", "load_problem", "pi_map", "problem_from_dict", "push_forward",
    "reference_solve", "solve_level", "study", "validate",
]
