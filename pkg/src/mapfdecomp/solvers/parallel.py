"""Priority Inheritance with Backtracking (PIBT).

All agents advance one timestep at a time; the solver cannot take external
paths, only cells to treat as walls.
"""
from __future__ import annotations

import random
import sys
from typing import Iterable, Sequence

from ..grid import AgentTask, Coord, GridMap, heuristic_tables
from .base import Deadline, Solution, paths_from_indices

_NIL = -1
_FAR = 1 << 30


class PIBT:
    """PIBT, optionally with the swap operation of later PIBT variants.

    Plain PIBT deadlocks when two agents meet head-on in a corridor, since the
    pushed agent only ever retreats.  With ``swap`` set, the swap check runs
    before an agent is planned.  It simulates whether the pair has to pass
    each other and whether a branching cell nearby allows it.  If so the agent
    reverses its preferences and pulls the other one after it.  Swapping alone
    tends to oscillate in open areas, so ``parallel_solve`` only falls back to
    it when plain PIBT runs out of steps.
    """

    def __init__(self, grid: GridMap, starts: Sequence[int], goals: Sequence[int], blocked: frozenset[int], seed: int = 0, swap: bool = False):
        self.swap = swap
        self.seed = seed
        self.grid = grid
        self.starts = list(starts)
        self.goals = list(goals)
        self.blocked = blocked
        self.n = len(starts)
        self.dist = heuristic_tables(grid, self.goals, blocked)
        self.rng = random.Random(seed)
        self.nbrs = [tuple(v for v in nbrs if v not in blocked) for nbrs in grid.adjacency]
        self.goal_of = {g: i for i, g in enumerate(self.goals)}
        self.occupied_now: dict[int, int] = {}
        self.occupied_nxt: dict[int, int] = {}

    def solvable(self) -> bool:
        return all(d[s] >= 0 for d, s in zip(self.dist, self.starts))

    def d(self, i: int, v: int) -> int:
        x = self.dist[i][v]
        return x if x >= 0 else _FAR

    def _candidates(self, i: int, here: int) -> list[int]:
        dist = self.dist[i]
        cands = [here] + [v for v in self.nbrs[here] if dist[v] >= 0]
        self.rng.shuffle(cands)
        return sorted(cands, key=lambda v: dist[v])

    def _plan(self, q_from: list[int], q_to: list[int], i: int) -> bool:
        cands = self._candidates(i, q_from[i])
        swap_agent = self._swap_partner(i, cands[0], q_from, q_to) if self.swap else _NIL
        if swap_agent != _NIL:
            cands.reverse()
        for k, v in enumerate(cands):
            if v in self.occupied_nxt:
                continue
            j = self.occupied_now.get(v, _NIL)
            # no swapping with the agent standing on v
            if j != _NIL and q_to[j] == q_from[i]:
                continue
            q_to[i] = v
            self.occupied_nxt[v] = i
            if j != _NIL and j != i and q_to[j] == _NIL and not self._plan(q_from, q_to, j):
                continue
            if k == 0 and swap_agent != _NIL and q_to[swap_agent] == _NIL and q_from[i] not in self.occupied_nxt:
                # pull the partner into the cell just vacated
                q_to[swap_agent] = q_from[i]
                self.occupied_nxt[q_from[i]] = swap_agent
            return True
        q_to[i] = q_from[i]
        self.occupied_nxt[q_from[i]] = i
        return False

    # --- swap operation ---

    def _swap_partner(self, i: int, best: int, q_from: list[int], q_to: list[int]) -> int:
        here = q_from[i]
        j = self.occupied_now.get(best, _NIL)
        if j != _NIL and j != i and q_to[j] == _NIL and self._swap_required(i, j, here, q_from[j]) and self._swap_possible(q_from[j], here):
            return j
        # clearing: an agent behind i that needs to get past it
        for u in self.nbrs[here]:
            k = self.occupied_now.get(u, _NIL)
            if k == _NIL or best == q_from[k]:
                continue
            if self._swap_required(k, i, here, q_from[k]) and self._swap_possible(best, here):
                return k
        return _NIL

    def _pull_options(self, v_puller: int, v_pusher: int) -> tuple[int, int]:
        """Count of cells next to ``v_puller`` it could step back into, and one of them."""
        count, last = 0, _NIL
        for u in self.nbrs[v_puller]:
            a = self.occupied_now.get(u, _NIL)
            if u == v_pusher or (len(self.nbrs[u]) == 1 and a != _NIL and self.goals[a] == u):
                continue
            count, last = count + 1, u
        return count, last

    def _swap_required(self, pusher: int, puller: int, v_pusher: int, v_puller: int) -> bool:
        start_pusher = v_pusher
        while self.d(pusher, v_puller) < self.d(pusher, v_pusher):
            count, nxt = self._pull_options(v_puller, v_pusher)
            if count >= 2:
                return False  # room to step aside, no swap needed
            if count == 0:
                break
            v_pusher, v_puller = v_puller, nxt
            if v_puller == start_pusher:
                break
        return self.d(puller, v_pusher) < self.d(puller, v_puller) and (
            self.d(pusher, v_pusher) == 0 or self.d(pusher, v_puller) < self.d(pusher, v_pusher)
        )

    def _swap_possible(self, v_pusher: int, v_puller: int) -> bool:
        origin = v_pusher
        while v_puller != origin:
            count, nxt = self._pull_options(v_puller, v_pusher)
            if count >= 2:
                return True
            if count == 0:
                return False
            v_pusher, v_puller = v_puller, nxt
        return False

    def step(self, q_from: list[int], priorities: list[float]) -> list[int]:
        q_to = [_NIL] * self.n
        self.occupied_now = {v: i for i, v in enumerate(q_from)}
        self.occupied_nxt = {}
        for i in sorted(range(self.n), key=lambda a: (-priorities[a], a)):
            if q_to[i] == _NIL:
                self._plan(q_from, q_to, i)
        return q_to

    def run(self, max_steps: int, deadline: Deadline) -> list[list[int]] | None:
        self.rng = random.Random(self.seed)
        size = self.grid.passable.size
        priorities = [self.dist[i][self.starts[i]] / size for i in range(self.n)]
        configs = [list(self.starts)]
        while True:
            current = configs[-1]
            if all(c == g for c, g in zip(current, self.goals)):
                return configs
            if len(configs) > max_steps:
                return None
            deadline.check()
            q = self.step(current, priorities)
            configs.append(q)
            for i in range(self.n):
                if q[i] != self.goals[i]:
                    priorities[i] += 1
                else:
                    priorities[i] -= int(priorities[i])


def configs_to_paths(configs: list[list[int]], goals: Sequence[int]) -> list[list[int]]:
    """Per-agent paths, trimmed after the last time each agent was away from its goal."""
    paths = []
    for i, goal in enumerate(goals):
        last_away = -1
        for t, q in enumerate(configs):
            if q[i] != goal:
                last_away = t
        paths.append([q[i] for q in configs[: last_away + 2]])
    return paths


def parallel_solve(
    grid: GridMap,
    tasks: Sequence[AgentTask],
    blocked: Iterable[Coord] = (),
    deadline: float | None = None,
    max_steps: int | None = None,
    seed: int = 0,
) -> Solution | None:
    """Run PIBT on ``tasks`` with ``blocked`` cells as walls.

    The step budget defaults to ten times the number of passable cells.  If
    plain PIBT exhausts it, one more run with the swap operation gets the same
    budget.  Returns ``None`` if that fails too (PIBT is incomplete); raises
    ``SolverTimeout`` past the deadline.
    """
    clock = Deadline(deadline)
    blocked_idx = frozenset(grid.index(c) for c in blocked)
    starts = [grid.index(t.start) for t in tasks]
    goals = [grid.index(t.target) for t in tasks]
    if blocked_idx & (set(starts) | set(goals)):
        raise ValueError("blocked cells overlap starts or targets")
    solver = PIBT(grid, starts, goals, blocked_idx, seed=seed)
    if not solver.solvable():
        return None
    if max_steps is None:
        max_steps = 10 * grid.free_count
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * len(tasks) + 100))
    try:
        configs = solver.run(max_steps, clock)
        if configs is None:
            solver.swap = True
            configs = solver.run(max_steps, clock)
    finally:
        sys.setrecursionlimit(limit)
    if configs is None:
        return None
    paths = configs_to_paths(configs, goals)
    return paths_from_indices(grid, {t.id: p for t, p in zip(tasks, paths)})
