from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ..grid import AgentTask, Coord, GridMap

Path = tuple[Coord, ...]


class SolverTimeout(TimeoutError):
    """The caller's deadline passed before the solver finished."""


class InvalidPathError(ValueError):
    def __init__(self, agent, timestep: int, reason: str):
        self.agent = agent
        self.timestep = timestep
        super().__init__(f"agent {agent}, t={timestep}: {reason}")


@dataclass(frozen=True)
class Solution:
    paths: dict[int, Path]

    @property
    def soc(self) -> int:
        return sum(len(p) for p in self.paths.values())

    @property
    def makespan(self) -> int:
        return max((len(p) for p in self.paths.values()), default=0)

    def merged(self, other: "Solution") -> "Solution":
        overlap = self.paths.keys() & other.paths.keys()
        if overlap:
            raise ValueError(f"agents {sorted(overlap)} appear in both solutions")
        return Solution({**self.paths, **other.paths})

    def to_text(self) -> str:
        lines = []
        for agent in sorted(self.paths):
            cells = " ".join(f"({','.join(map(str, c))})@{t}" for t, c in enumerate(self.paths[agent]))
            lines.append(f"{agent}: {cells}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Solution":
        paths = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            head, _, body = line.partition(":")
            try:
                agent = int(head)
                cells = []
                for t, token in enumerate(body.split()):
                    cell, _, stamp = token.partition("@")
                    if int(stamp) != t:
                        raise ValueError(f"timestamp {stamp} out of sequence")
                    cells.append(tuple(int(v) for v in cell.strip("()").split(",")))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            paths[agent] = tuple(cells)
        return cls(paths)


@dataclass(frozen=True)
class ExternalConstraint:
    """Paths of earlier-solved agents; each occupies its last cell forever after finishing."""

    paths: tuple[Path, ...] = ()
    # set by extended(); lets solvers reuse work done for the parent
    parent: "ExternalConstraint | None" = field(default=None, compare=False, repr=False)
    cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_solutions(cls, solutions: Iterable[Solution]) -> "ExternalConstraint":
        return cls(tuple(p for s in solutions for _, p in sorted(s.paths.items())))

    def extended(self, solution: Solution) -> "ExternalConstraint":
        """This constraint plus the paths of ``solution``, appended in agent order."""
        added = tuple(p for _, p in sorted(solution.paths.items()))
        return ExternalConstraint(self.paths + added, parent=self)


@dataclass(frozen=True)
class Conflict:
    kind: str  # "vertex" or "swap"
    time: int  # for swaps, the move is time -> time + 1
    agent: int
    other: int  # agent id, or index into the external paths when other_external
    other_external: bool = False
    cells: tuple[Coord, ...] = field(default=())


class Deadline:
    """Monotonic-clock budget; ``None`` seconds means unlimited."""

    def __init__(self, seconds: float | None):
        self.end = None if seconds is None else time.perf_counter() + seconds

    def remaining(self) -> float | None:
        return None if self.end is None else self.end - time.perf_counter()

    def expired(self) -> bool:
        return self.end is not None and time.perf_counter() > self.end

    def check(self) -> None:
        if self.expired():
            raise SolverTimeout("deadline exceeded")


def check_path(grid: GridMap, task: AgentTask, path: Sequence[Coord], agent=None) -> None:
    agent = task.id if agent is None else agent
    if not path:
        raise InvalidPathError(agent, 0, "empty path")
    if tuple(path[0]) != task.start:
        raise InvalidPathError(agent, 0, f"starts at {path[0]}, expected {task.start}")
    if tuple(path[-1]) != task.target:
        raise InvalidPathError(agent, len(path) - 1, f"ends at {path[-1]}, expected {task.target}")
    for t, cell in enumerate(path):
        if not grid.is_passable(cell):
            raise InvalidPathError(agent, t, f"{cell} is not passable")
        if t and cell != path[t - 1]:
            step = sum(abs(a - b) for a, b in zip(cell, path[t - 1]))
            if step != 1:
                raise InvalidPathError(agent, t, f"jump from {path[t - 1]} to {cell}")


def validate_solution(
    grid: GridMap,
    tasks: Sequence[AgentTask],
    solution: Solution,
    external: ExternalConstraint | None = None,
) -> list[Conflict]:
    """All vertex and swap conflicts, with every agent parked at its final cell after arrival.

    Conflicts among the external paths themselves are not reported.
    """
    by_id = {t.id: t for t in tasks}
    missing = by_id.keys() - solution.paths.keys()
    if missing:
        raise InvalidPathError(min(missing), 0, "agent has no path")
    for agent, path in solution.paths.items():
        if agent not in by_id:
            raise InvalidPathError(agent, 0, "path for an unknown agent")
        check_path(grid, by_id[agent], path)

    # bodies: (is_external, id, path)
    bodies = [(False, a, solution.paths[a]) for a in sorted(solution.paths)]
    if external is not None:
        for i, path in enumerate(external.paths):
            if not path:
                raise InvalidPathError(f"external {i}", 0, "empty path")
            bodies.append((True, i, tuple(path)))
    horizon = max(len(p) for _, _, p in bodies)

    def pos(path: Path, t: int) -> Coord:
        return path[t] if t < len(path) else path[-1]

    conflicts: list[Conflict] = []

    def record(kind: str, t: int, b1, b2, cells) -> None:
        if b1[0] and b2[0]:
            return
        if b1[0]:
            b1, b2 = b2, b1
        if not b2[0] and b2[1] < b1[1]:
            b1, b2 = b2, b1
        conflicts.append(Conflict(kind, t, b1[1], b2[1], b2[0], cells))

    for t in range(horizon):
        at: dict[Coord, list] = defaultdict(list)
        for body in bodies:
            at[pos(body[2], t)].append(body)
        for cell, group in at.items():
            for i in range(len(group)):
                for j in range(i + 1, len(group)):
                    record("vertex", t, group[i], group[j], (cell,))
        if t + 1 < horizon:
            moves: dict[tuple[Coord, Coord], list] = defaultdict(list)
            for body in bodies:
                u, v = pos(body[2], t), pos(body[2], t + 1)
                if u != v:
                    moves[(u, v)].append(body)
            for (u, v), group in moves.items():
                if u < v:
                    for b1 in group:
                        for b2 in moves.get((v, u), ()):
                            record("swap", t, b1, b2, (u, v))
    return conflicts


def paths_from_indices(grid: GridMap, paths: Mapping[int, Sequence[int]]) -> Solution:
    cache: dict[int, Coord] = {}
    out = {}
    for agent, cells in paths.items():
        row = []
        for c in cells:
            if c not in cache:
                cache[c] = grid.coord(c)
            row.append(cache[c])
        out[agent] = tuple(row)
    return Solution(out)
