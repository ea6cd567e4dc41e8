"""Decompose, solve levels in order, merge, validate."""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .connectivity import build_connectivity_graph
from .decompose import Decomposition, Level, UnsolvableInstanceError, decompose_instance, solve_order
from .grid import Coord, Instance, is_instance_solvable
from .solvers import (
    Deadline,
    ExternalConstraint,
    Solution,
    SolverTimeout,
    parallel_solve,
    serial_solve,
    validate_solution,
)

__all__ = [
    "LayeredOutcome",
    "MergeConflictError",
    "SolverKind",
    "layered_solve",
    "merge_results",
    "raw_solve",
    "solve_order",
]


class SolverKind(enum.Enum):
    SERIAL = "serial"
    PARALLEL = "parallel"


class MergeConflictError(RuntimeError):
    """The combined plan failed validation; indicates a bug, never a solver miss."""


DEFAULT_SOLVERS: dict[SolverKind, Callable] = {
    SolverKind.SERIAL: serial_solve,
    SolverKind.PARALLEL: parallel_solve,
}


@dataclass
class LayeredOutcome:
    solution: Solution | None
    decomposition: Decomposition
    per_level_seconds: list[float] = field(default_factory=list)
    failure_level: int | None = None
    timed_out: bool = False
    decomposition_seconds: float = 0.0
    merge_seconds: float = 0.0
    total_seconds: float = 0.0
    level_solutions: list[Solution] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.solution is not None


def merge_results(solutions: Sequence[Solution]) -> list[Solution]:
    """Insert waits so that later solutions never enter a cell an earlier one still uses.

    A per-cell table keeps the last time any already merged path occupies the
    cell.  Sweeping each solution forward in time, whenever some unfinished
    path would step onto a cell whose last-occupied time is at or after the
    current step, every unfinished path of that solution waits one step.
    """
    last_occupied: dict[Coord, int] = {}
    merged = []
    for solution in solutions:
        paths = {a: list(p) for a, p in solution.paths.items()}
        t = 1
        while True:
            active = [p for p in paths.values() if t <= len(p) - 1]
            if not active:
                break
            if any(last_occupied.get(p[t], 0) >= t for p in active):
                for p in active:
                    p.insert(t, p[t - 1])
                continue
            for p in active:
                last_occupied[p[t]] = t
            t += 1
        merged.append(Solution({a: tuple(p) for a, p in paths.items()}))
    return merged


def _cells(instance: Instance, levels: Sequence[Level], attr: str) -> set[Coord]:
    return {getattr(instance.tasks[a], attr) for lv in levels for a in lv.agents}


def raw_solve(instance: Instance, kind: SolverKind = SolverKind.SERIAL, solver: Callable | None = None, deadline: float | None = None) -> Solution | None:
    solver = solver or DEFAULT_SOLVERS[kind]
    if kind is SolverKind.SERIAL:
        return solver(instance.map, instance.tasks, ExternalConstraint(), (), deadline)
    return solver(instance.map, instance.tasks, (), deadline)


def layered_solve(
    instance: Instance,
    solver: Callable | None = None,
    kind: SolverKind = SolverKind.SERIAL,
    deadline: float | None = None,
    decomposition: Decomposition | None = None,
) -> LayeredOutcome:
    """Solve ``instance`` level by level.

    Serial solvers get every earlier path as an external constraint and the
    starts of later levels as walls.  Parallel solvers get the targets of
    earlier levels and the starts of later levels as walls, and their
    results are merged afterwards.  ``deadline`` (seconds) covers the whole
    run including decomposition.
    """
    if not is_instance_solvable(instance):
        raise UnsolvableInstanceError("some agent cannot reach its target")
    solver = solver or DEFAULT_SOLVERS[kind]
    clock = Deadline(deadline)
    t_begin = time.perf_counter()
    if decomposition is None:
        decomposition = decompose_instance(instance, build_connectivity_graph(instance))
    t_decomposed = time.perf_counter()
    outcome = LayeredOutcome(None, decomposition, decomposition_seconds=t_decomposed - t_begin)

    levels = decomposition.levels
    solved: list[Solution] = []
    external = ExternalConstraint()
    for pos, level in enumerate(levels):
        tasks = [instance.tasks[a] for a in sorted(level.agents)]
        blocked = _cells(instance, levels[pos + 1 :], "start")
        if kind is SolverKind.PARALLEL:
            blocked |= _cells(instance, levels[:pos], "target")
        t0 = time.perf_counter()
        remaining = clock.remaining()
        result = None
        try:
            if remaining is not None and remaining <= 0:
                raise SolverTimeout("deadline exceeded before level started")
            if kind is SolverKind.SERIAL:
                result = solver(instance.map, tasks, external, blocked, remaining)
            else:
                result = solver(instance.map, tasks, blocked, remaining)
        except SolverTimeout:
            outcome.timed_out = True
        outcome.per_level_seconds.append(time.perf_counter() - t0)
        if result is None:
            outcome.failure_level = pos
            outcome.level_solutions = solved
            outcome.total_seconds = time.perf_counter() - t_begin
            return outcome
        solved.append(result)
        if kind is SolverKind.SERIAL:
            external = external.extended(result)

    t_merge = time.perf_counter()
    if kind is SolverKind.PARALLEL:
        solved = merge_results(solved)
    final = Solution({a: p for s in solved for a, p in s.paths.items()})
    conflicts = validate_solution(instance.map, instance.tasks, final)
    outcome.merge_seconds = time.perf_counter() - t_merge
    if conflicts:
        raise MergeConflictError(f"{len(conflicts)} conflicts in the combined plan, first: {conflicts[0]}")
    outcome.solution = final
    outcome.level_solutions = solved
    outcome.total_seconds = time.perf_counter() - t_begin
    return outcome
