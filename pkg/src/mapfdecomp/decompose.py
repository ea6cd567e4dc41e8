"""Instance decomposition: initial clusters, cluster bipartition, levels and solve order."""
from __future__ import annotations

import enum
import time
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence, TypeVar

from .connectivity import (
    ConnectivityGraph,
    DependencePath,
    NodeKind,
    agents_connected_within,
    agents_on_path,
    build_connectivity_graph,
    path_exists,
    search_dependence_path,
    visited_agents,
)
from .grid import Instance

AgentSet = frozenset[int]
T = TypeVar("T", bound=Hashable)


class UnsolvableInstanceError(ValueError):
    """Some agent has no route from its start to its target."""


@dataclass(frozen=True)
class Level:
    agents: AgentSet
    order: int

    def __len__(self) -> int:
        return len(self.agents)


@dataclass(frozen=True)
class StepStats:
    rate: float
    count: int


@dataclass(frozen=True)
class ClusterLevels:
    """Levels of one cluster, with the dependence paths and ordering edges they came from."""

    cluster: AgentSet
    levels: tuple[Level, ...]
    paths: dict[int, DependencePath]
    order_edges: frozenset[tuple[int, int]]


@dataclass(frozen=True, eq=False)
class Decomposition:
    instance: Instance
    levels: tuple[Level, ...]  # global solve order
    initial_clusters: tuple[AgentSet, ...]
    clusters: tuple[AgentSet, ...]
    cluster_levels: tuple[ClusterLevels, ...]
    step_stats: tuple[StepStats, StepStats, StepStats]
    step_seconds: tuple[float, float, float] = field(default=(0.0, 0.0, 0.0))

    @property
    def sizes(self) -> list[int]:
        return [len(level) for level in self.levels]

    @property
    def rate(self) -> float:
        return self.step_stats[-1].rate

    def to_report(self) -> str:
        lines = [
            f"step {i}: rate={s.rate:.6f} subproblems={s.count}"
            for i, s in enumerate(self.step_stats, start=1)
        ]
        lines += [f"{pos}: {sorted(level.agents)}" for pos, level in enumerate(self.levels)]
        return "\n".join(lines) + "\n"


# --- small graph helpers ---------------------------------------------------


def connected_components(nodes: Iterable[T], edges: Iterable[tuple[T, T]]) -> list[set[T]]:
    adj: dict[T, set[T]] = {n: set() for n in nodes}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen: set[T] = set()
    comps = []
    for n in adj:
        if n in seen:
            continue
        comp = {n}
        queue = deque([n])
        seen.add(n)
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    comp.add(v)
                    queue.append(v)
        comps.append(comp)
    return comps


def tarjan_scc(nodes: Sequence[T], successors: Callable[[T], Iterable[T]]) -> list[list[T]]:
    """Strongly connected components, iteratively (no recursion limit on long chains).

    Components come out in reverse topological order of the condensation.
    """
    index: dict[T, int] = {}
    lowlink: dict[T, int] = {}
    on_stack: set[T] = set()
    stack: list[T] = []
    result: list[list[T]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(successors(root)))]
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    advanced = True
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                result.append(comp)
    return result


# --- clusters --------------------------------------------------------------


def is_independent(agents: Iterable[int], graph: ConnectivityGraph) -> bool:
    """Every member can route while visiting only members' starts and targets."""
    agents = set(agents)
    if not agents:
        raise ValueError("independence is defined for nonempty agent sets")
    return all(agents_connected_within(graph, agents).values())


def initial_clusters(instance: Instance, graph: ConnectivityGraph) -> list[AgentSet]:
    edges = []
    for a in range(instance.k):
        path = search_dependence_path(a, graph)
        if path is None:
            raise UnsolvableInstanceError(f"agent {a} cannot reach its target")
        edges += [(a, b) for b in visited_agents(path, graph)]
    comps = connected_components(range(instance.k), edges)
    return sorted((frozenset(c) for c in comps), key=min)


def unavoidance_edges(cluster: Iterable[int], graph: ConnectivityGraph) -> set[tuple[int, int]]:
    """Pairs (i, j) where every cluster-confined path of i visits j."""
    cluster = frozenset(cluster)
    edges = set()
    for i in sorted(cluster):
        path = search_dependence_path(i, graph, available=cluster)
        if path is None:
            raise ValueError(f"agent {i} cannot route inside its cluster")
        # j off this path is avoidable by construction
        for j in sorted(visited_agents(path, graph)):
            if not path_exists(i, graph, available=cluster, avoid={j}):
                edges.add((min(i, j), max(i, j)))
    return edges


def max_unavoidable_set(cluster: Iterable[int], graph: ConnectivityGraph) -> AgentSet:
    """Largest connected component of the cluster's unavoidance graph (smallest id wins ties)."""
    cluster = frozenset(cluster)
    if not cluster:
        raise ValueError("cluster must be nonempty")
    comps = connected_components(sorted(cluster), unavoidance_edges(cluster, graph))
    return frozenset(min(comps, key=lambda c: (-len(c), min(c))))


def bipartition(cluster: Iterable[int], graph: ConnectivityGraph) -> tuple[AgentSet, AgentSet]:
    """Split an independent cluster into an independent major set and an independent (or empty) rest."""
    cluster = frozenset(cluster)
    major = set(max_unavoidable_set(cluster, graph))
    remain = set(cluster - major)
    while True:
        # remaining agents that cannot route around the major set join it
        while remain:
            ok = agents_connected_within(graph, remain)
            moved = {a for a, good in ok.items() if not good}
            if not moved:
                break
            remain -= moved
            major |= moved
        # major agents that need remaining agents pull them in
        while True:
            ok = agents_connected_within(graph, major)
            stuck = sorted(a for a, good in ok.items() if not good)
            if not stuck:
                break
            for a in stuck:
                path = search_dependence_path(a, graph, available=cluster, free_of_charge=major)
                pulled = visited_agents(path, graph) & remain
                remain -= pulled
                major |= pulled
        if not remain or is_independent(remain, graph):
            return frozenset(major), frozenset(remain)


def decompose_to_clusters(instance: Instance, graph: ConnectivityGraph, initial: Sequence[AgentSet] | None = None) -> list[AgentSet]:
    if initial is None:
        initial = initial_clusters(instance, graph)
    clusters = []
    for r in initial:
        temp = frozenset(r)
        while temp:
            major, temp = bipartition(temp, graph)
            clusters.append(major)
    return sorted(clusters, key=min)


# --- levels ----------------------------------------------------------------


def solving_order_graph(cluster: Iterable[int], graph: ConnectivityGraph) -> tuple[dict[int, DependencePath], set[tuple[int, int]]]:
    """Per-agent cluster-confined paths and the edges ``(before, after)`` they impose."""
    cluster = frozenset(cluster)
    paths = {}
    edges = set()
    for a in sorted(cluster):
        path = search_dependence_path(a, graph, available=cluster)
        if path is None:
            raise ValueError(f"agent {a} cannot route inside its cluster")
        paths[a] = path
        edges |= order_edges_from_path(path, graph)
    return paths, edges


def order_edges_from_path(path: DependencePath, graph: ConnectivityGraph) -> set[tuple[int, int]]:
    a = path.agent
    edges = set()
    for b, kind in agents_on_path(path, graph):
        # passing b's start: b leaves first; passing b's target: a finishes before b arrives
        edges.add((b, a) if kind is NodeKind.START else (a, b))
    return edges


def order_levels(components: Iterable[Iterable[int]], edges: Iterable[tuple[int, int]]) -> list[Level]:
    """Rank strongly connected components by longest path from the roots of the condensation."""
    comps = [frozenset(c) for c in components]
    comp_of = {a: i for i, c in enumerate(comps) for a in c}
    succ: dict[int, set[int]] = defaultdict(set)
    indeg = [0] * len(comps)
    for u, v in edges:
        cu, cv = comp_of[u], comp_of[v]
        if cu != cv and cv not in succ[cu]:
            succ[cu].add(cv)
            indeg[cv] += 1
    rank = [0] * len(comps)
    queue = deque(sorted((i for i in range(len(comps)) if indeg[i] == 0), key=lambda i: min(comps[i])))
    done = 0
    while queue:
        u = queue.popleft()
        done += 1
        for v in sorted(succ[u]):
            rank[v] = max(rank[v], rank[u] + 1)
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    if done != len(comps):
        raise ValueError("level graph has a cycle; components are not strongly connected")
    levels = [Level(c, rank[i]) for i, c in enumerate(comps)]
    return sorted(levels, key=lambda lv: (lv.order, min(lv.agents)))


def decompose_to_levels(cluster: Iterable[int], graph: ConnectivityGraph) -> ClusterLevels:
    cluster = frozenset(cluster)
    paths, edges = solving_order_graph(cluster, graph)
    succ: dict[int, list[int]] = defaultdict(list)
    for u, v in sorted(edges):
        succ[u].append(v)
    comps = tarjan_scc(sorted(cluster), lambda a: succ[a])
    levels = order_levels(comps, edges)
    return ClusterLevels(cluster, tuple(levels), paths, frozenset(edges))


def solve_order(per_cluster: Sequence[Sequence[Level]]) -> list[Level]:
    """Interleave clusters' level sequences: by rank, then by the cluster's smallest agent id.

    Each cluster's internal order is preserved; clusters impose nothing on
    each other.
    """
    keyed = []
    for levels in per_cluster:
        if not levels:
            continue
        cluster_min = min(a for lv in levels for a in lv.agents)
        keyed += [((pos, cluster_min), lv) for pos, lv in enumerate(levels)]
    return [lv for _, lv in sorted(keyed, key=lambda item: item[0])]


# --- metrics ---------------------------------------------------------------


class Comparison(enum.Enum):
    A_BETTER = "a-better"
    B_BETTER = "b-better"
    EQUAL = "equal"


def compare_decompositions(a: Iterable[int], b: Iterable[int]) -> Comparison:
    """Compare subproblem size lists: sorted descending, the first smaller entry wins."""
    sa, sb = sorted(a, reverse=True), sorted(b, reverse=True)
    if not sa or not sb:
        raise ValueError("decompositions need at least one subproblem")
    if sa == sb:
        return Comparison.EQUAL
    return Comparison.A_BETTER if sa < sb else Comparison.B_BETTER


def decomposition_rate(groups: Iterable[Iterable[int] | Level], k: int) -> float:
    sizes = [len(g.agents) if isinstance(g, Level) else len(set(g)) for g in groups]
    if k < 1 or sum(sizes) != k:
        raise ValueError("groups must partition the k agents")
    return max(sizes) / k


def _stats(groups: Sequence, k: int) -> StepStats:
    return StepStats(decomposition_rate(groups, k), len(groups))


def decompose_instance(instance: Instance, graph: ConnectivityGraph | None = None) -> Decomposition:
    """Run all three decomposition steps and return levels in global solve order."""
    t0 = time.perf_counter()
    if graph is None:
        graph = build_connectivity_graph(instance)
    initial = initial_clusters(instance, graph)
    t1 = time.perf_counter()
    clusters = decompose_to_clusters(instance, graph, initial)
    t2 = time.perf_counter()
    per_cluster = [decompose_to_levels(r, graph) for r in clusters]
    levels = solve_order([cl.levels for cl in per_cluster])
    t3 = time.perf_counter()
    k = instance.k
    return Decomposition(
        instance=instance,
        levels=tuple(levels),
        initial_clusters=tuple(initial),
        clusters=tuple(clusters),
        cluster_levels=tuple(per_cluster),
        step_stats=(_stats(initial, k), _stats(clusters, k), _stats(levels, k)),
        step_seconds=(t1 - t0, t2 - t1, t3 - t2),
    )
