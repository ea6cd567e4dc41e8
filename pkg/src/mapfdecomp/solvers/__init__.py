"""Serial and parallel MAPF solver interfaces with reference implementations."""
from .base import (
    Conflict,
    Deadline,
    ExternalConstraint,
    InvalidPathError,
    Path,
    Solution,
    SolverTimeout,
    validate_solution,
)
from .parallel import parallel_solve
from .serial import serial_solve

__all__ = [
    "Conflict",
    "Deadline",
    "ExternalConstraint",
    "InvalidPathError",
    "Path",
    "Solution",
    "SolverTimeout",
    "parallel_solve",
    "serial_solve",
    "validate_solution",
]
