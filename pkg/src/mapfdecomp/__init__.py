"""Solvability-preserving decomposition of multi-agent path finding instances."""
from .connectivity import build_connectivity_graph, search_dependence_path
from .decompose import Decomposition, Level, compare_decompositions, decompose_instance, decomposition_rate
from .grid import AgentTask, GridMap, Instance, is_instance_solvable, load_map, load_scenario, make_instance
from .layered import LayeredOutcome, SolverKind, layered_solve, merge_results, raw_solve
from .solvers import ExternalConstraint, Solution, parallel_solve, serial_solve, validate_solution

__all__ = [
    "AgentTask",
    "Decomposition",
    "ExternalConstraint",
    "GridMap",
    "Instance",
    "LayeredOutcome",
    "Level",
    "Solution",
    "SolverKind",
    "build_connectivity_graph",
    "compare_decompositions",
    "decompose_instance",
    "decomposition_rate",
    "is_instance_solvable",
    "layered_solve",
    "load_map",
    "load_scenario",
    "make_instance",
    "merge_results",
    "parallel_solve",
    "raw_solve",
    "search_dependence_path",
    "serial_solve",
    "validate_solution",
]
