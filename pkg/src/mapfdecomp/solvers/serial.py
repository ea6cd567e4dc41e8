"""Prioritized planning with space-time A*, in the style of HCA*.

Agents are planned one at a time in descending start-to-target distance.
Each search treats external paths and already planned agents as moving
obstacles that park at their final cell forever.
"""
from __future__ import annotations

import heapq
from collections import defaultdict
from typing import Iterable, Sequence

from ..grid import AgentTask, Coord, GridMap, heuristic_tables
from .base import Deadline, ExternalConstraint, Solution, SolverTimeout, paths_from_indices

_CHECK_EVERY = 512


class ReservationTable:
    def __init__(self):
        self.vertex: dict[int, set[int]] = defaultdict(set)
        self.moves: set[tuple[int, int, int]] = set()
        self.parked: dict[int, int] = {}
        self.last_busy: dict[int, int] = {}
        self.static_after = 0

    def add(self, cells: Sequence[int]) -> None:
        last = len(cells) - 1
        for t, c in enumerate(cells[:-1]):
            self.vertex[t].add(c)
            if self.last_busy.get(c, -1) < t:
                self.last_busy[c] = t
            if cells[t + 1] != c:
                self.moves.add((t, c, cells[t + 1]))
        final = cells[-1]
        if final in self.parked:
            self.parked[final] = min(self.parked[final], last)
        else:
            self.parked[final] = last
        self.static_after = max(self.static_after, last)

    def copy(self) -> "ReservationTable":
        other = ReservationTable()
        other.vertex = defaultdict(set, {t: set(cells) for t, cells in self.vertex.items()})
        other.moves = set(self.moves)
        other.parked = dict(self.parked)
        other.last_busy = dict(self.last_busy)
        other.static_after = self.static_after
        return other

    @classmethod
    def for_external(cls, grid: GridMap, external: ExternalConstraint | None) -> "ReservationTable":
        """A fresh table holding ``external``; built incrementally along ``extended`` chains."""
        if external is None or not external.paths:
            return cls()
        return cls._cached(grid, external).copy()

    @classmethod
    def _cached(cls, grid: GridMap, external: ExternalConstraint) -> "ReservationTable":
        key = ("reservations", id(grid))
        table = external.cache.get(key)
        if table is not None:
            return table
        parent = external.parent
        if parent is not None and external.paths[: len(parent.paths)] == parent.paths:
            # take over the parent's table; the parent rebuilds it if asked again
            table = parent.cache.pop(key, None) or cls._cached(grid, parent)
            parent.cache.pop(key, None)
            fresh = external.paths[len(parent.paths) :]
        else:
            table, fresh = cls(), external.paths
        for path in fresh:
            table.add([grid.index(c) for c in path])
        external.cache[key] = table
        return table

    def occupied(self, cell: int, t: int) -> bool:
        park = self.parked.get(cell)
        if park is not None and t >= park:
            return True
        return cell in self.vertex.get(t, ())

    def can_settle(self, cell: int, t: int) -> bool:
        """Nobody else uses ``cell`` at time ``t`` or later."""
        return self.last_busy.get(cell, -1) < t and cell not in self.parked


def space_time_astar(
    grid: GridMap,
    start: int,
    goal: int,
    table: ReservationTable,
    heuristic: Sequence[int],
    blocked: frozenset[int],
    horizon: int,
    deadline: Deadline,
) -> list[int] | None:
    if table.occupied(start, 0) or heuristic[start] < 0:
        return None
    adj = grid.adjacency
    frozen = table.static_after
    # cannot finish before the goal's last reservation; keeps f honest for late goals
    settle = table.last_busy.get(goal, -1) + 1
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    closed: set[tuple[int, int]] = set()
    heap = [(max(heuristic[start], settle), heuristic[start], 0, start)]
    expansions = 0
    while heap:
        _, h, negt, u = heapq.heappop(heap)
        t = -negt
        # past the last reservation the table is static; time no longer distinguishes states
        key = (u, min(t, frozen + 1))
        if key in closed:
            continue
        closed.add(key)
        expansions += 1
        if expansions % _CHECK_EVERY == 0:
            deadline.check()
        if u == goal and table.can_settle(u, t):
            cells = [u]
            state = (u, t)
            while state in parent:
                state = parent[state]
                cells.append(state[0])
            cells.reverse()
            return cells
        if t >= horizon:
            continue
        nt = t + 1
        for v in (u, *adj[u]):
            if v in blocked or heuristic[v] < 0:
                continue
            if table.occupied(v, nt):
                continue
            if v != u and (t, v, u) in table.moves:
                continue
            if (v, min(nt, frozen + 1)) in closed:
                continue
            if (v, nt) not in parent:
                parent[(v, nt)] = (u, t)
                hv = heuristic[v]
                heapq.heappush(heap, (max(nt + hv, settle), hv, -nt, v))
    return None


def serial_solve(
    grid: GridMap,
    tasks: Sequence[AgentTask],
    external: ExternalConstraint | None = None,
    blocked: Iterable[Coord] = (),
    deadline: float | None = None,
) -> Solution | None:
    """Plan ``tasks`` around ``external`` paths with ``blocked`` cells treated as walls.

    Returns ``None`` when some agent finds no path; raises ``SolverTimeout``
    when ``deadline`` seconds pass first.
    """
    clock = Deadline(deadline)
    blocked_idx = frozenset(grid.index(c) for c in blocked)
    table = ReservationTable.for_external(grid, external)
    longest_external = max((len(p) for p in external.paths), default=0) if external else 0
    horizon = longest_external + 2 * grid.free_count

    index = [(task.id, grid.index(task.start), grid.index(task.target)) for task in tasks]
    for agent, s, g in index:
        if s in blocked_idx or g in blocked_idx:
            raise ValueError(f"agent {agent} start or target is blocked")
    table_rows = heuristic_tables(grid, [g for _, _, g in index], blocked_idx)
    clock.check()
    heuristics = {}
    order = []
    for (agent, s, g), h in zip(index, table_rows):
        if h[s] < 0:
            return None
        heuristics[agent] = h
        order.append((-h[s], agent, s, g))
    order.sort()

    planned: dict[int, list[int]] = {}
    for _, agent, s, g in order:
        cells = space_time_astar(grid, s, g, table, heuristics[agent], blocked_idx, horizon, clock)
        if cells is None:
            return None
        table.add(cells)
        planned[agent] = cells
    return paths_from_indices(grid, planned)


__all__ = ["serial_solve", "space_time_astar", "ReservationTable", "SolverTimeout"]
