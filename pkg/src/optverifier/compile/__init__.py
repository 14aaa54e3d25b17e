"""Grounding, LP emission, solving and feasibility checking."""

from .grounding import FlatVar, GroundedModel, GroundedObjective, Row, bind_model, ground
from .feasibility import FeasibilityReport, Tolerances, check_feasibility
from .lp_writer import emit_lp, lp_names
from .solvers import Solution, SolverConfig, solve
from .brute_force import brute_force_solve
from .toy import instantiate_toy, load_external_parameters

__all__ = [
    "FlatVar", "GroundedModel", "GroundedObjective", "Row", "bind_model", "ground",
    "FeasibilityReport", "Tolerances", "check_feasibility",
    "emit_lp", "lp_names", "Solution", "SolverConfig", "solve", "brute_force_solve",
    "instantiate_toy", "load_external_parameters",
]
