"""Connectivity graph over free grid groups, starts and targets, plus dependence-path search.

Node ids are dense: free grid groups take ``0..G-1``, agent ``a``'s start node
is ``G + a`` and its target node is ``G + k + a``.  Lower ids are expanded
first when search costs tie.
"""
from __future__ import annotations

import enum
import heapq
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Collection, Iterable

import numpy as np
from scipy import ndimage

from .grid import Coord, Instance


class NodeKind(enum.Enum):
    FREE = "f"
    START = "s"
    TARGET = "t"


@dataclass(frozen=True)
class ConnNode:
    kind: NodeKind
    ref: int  # group id for FREE, agent id otherwise

    @property
    def label(self) -> str:
        return f"{self.ref}{self.kind.value}"


@dataclass(frozen=True)
class FreeGridGroup:
    id: int
    cells: frozenset[Coord]


@dataclass(frozen=True)
class DependencePath:
    agent: int
    nodes: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True, eq=False)
class ConnectivityGraph:
    instance: Instance
    num_groups: int
    cell_node: np.ndarray  # flat, -1 on unpassable cells
    adjacency: tuple[tuple[int, ...], ...]

    @property
    def k(self) -> int:
        return self.instance.k

    @property
    def num_nodes(self) -> int:
        return self.num_groups + 2 * self.k

    def start_node(self, agent: int) -> int:
        return self.num_groups + agent

    def target_node(self, agent: int) -> int:
        return self.num_groups + self.k + agent

    @cached_property
    def node_agent(self) -> tuple[int, ...]:
        """Owning agent of every node, -1 for free grid groups."""
        return tuple([-1] * self.num_groups + list(range(self.k)) * 2)

    def node(self, n: int) -> ConnNode:
        if n < self.num_groups:
            return ConnNode(NodeKind.FREE, n)
        if n < self.num_groups + self.k:
            return ConnNode(NodeKind.START, n - self.num_groups)
        return ConnNode(NodeKind.TARGET, n - self.num_groups - self.k)

    @property
    def nodes(self) -> list[ConnNode]:
        return [self.node(n) for n in range(self.num_nodes)]

    def label(self, n: int) -> str:
        return self.node(n).label

    def node_of(self, cell: Coord) -> int:
        return int(self.cell_node[self.instance.map.index(cell)])

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, nbrs in enumerate(self.adjacency) for v in nbrs if u < v]

    def free_groups(self) -> list[FreeGridGroup]:
        grid = self.instance.map
        members: list[list[Coord]] = [[] for _ in range(self.num_groups)]
        for idx in np.nonzero((self.cell_node >= 0) & (self.cell_node < self.num_groups))[0]:
            members[self.cell_node[idx]].append(grid.coord(int(idx)))
        return [FreeGridGroup(g, frozenset(cells)) for g, cells in enumerate(members)]

    def node_cells(self, n: int) -> frozenset[Coord]:
        grid = self.instance.map
        return frozenset(grid.coord(int(i)) for i in np.nonzero(self.cell_node == n)[0])

    def dump(self) -> str:
        """Plain-text adjacency listing: node labels, then one edge pair per line."""
        lines = [f"nodes {self.num_nodes}"]
        lines += [self.label(n) for n in range(self.num_nodes)]
        edges = self.edges()
        lines.append(f"edges {len(edges)}")
        lines += [f"{self.label(u)} {self.label(v)}" for u, v in edges]
        return "\n".join(lines) + "\n"


def build_connectivity_graph(instance: Instance) -> ConnectivityGraph:
    grid = instance.map
    k = instance.k
    special = np.zeros(grid.dims, dtype=bool)
    for task in instance.tasks:
        special[task.start] = True
        special[task.target] = True
    structure = ndimage.generate_binary_structure(grid.ndim, 1)
    labels, num_groups = ndimage.label(grid.passable & ~special, structure=structure)
    node = labels.astype(np.int64) - 1  # free groups 0..G-1, -1 elsewhere
    for task in instance.tasks:
        node[task.start] = num_groups + task.id
        node[task.target] = num_groups + k + task.id

    pairs = []
    for axis in range(grid.ndim):
        lo = node[tuple(slice(0, -1) if a == axis else slice(None) for a in range(grid.ndim))]
        hi = node[tuple(slice(1, None) if a == axis else slice(None) for a in range(grid.ndim))]
        mask = (lo >= 0) & (hi >= 0) & (lo != hi)
        a, b = lo[mask], hi[mask]
        pairs.append(np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1))
    edges = np.unique(np.concatenate(pairs), axis=0) if pairs else np.empty((0, 2), dtype=np.int64)

    num_nodes = num_groups + 2 * k
    adj: list[list[int]] = [[] for _ in range(num_nodes)]
    for u, v in edges.tolist():
        adj[u].append(v)
        adj[v].append(u)
    # an agent already at its target: the start node has no cell of its own
    for task in instance.tasks:
        if task.start == task.target:
            s, t = num_groups + task.id, num_groups + k + task.id
            adj[s].append(t)
            adj[t].append(s)
    return ConnectivityGraph(
        instance=instance,
        num_groups=int(num_groups),
        cell_node=node.ravel(),
        adjacency=tuple(tuple(sorted(n)) for n in adj),
    )


def _allowed_fn(graph: ConnectivityGraph, agent: int, available: Collection[int] | None, avoid: Collection[int]):
    node_agent = graph.node_agent
    available = set(available) if available else None
    avoid = set(avoid)
    if agent in avoid:
        raise ValueError(f"agent {agent} cannot avoid itself")

    def allowed(n: int) -> bool:
        b = node_agent[n]
        if b < 0 or b == agent:
            return True
        if b in avoid:
            return False
        return available is None or b in available

    return allowed


def search_dependence_path(
    agent: int,
    graph: ConnectivityGraph,
    available: Collection[int] | None = None,
    avoid: Collection[int] = (),
    free_of_charge: Collection[int] = (),
) -> DependencePath | None:
    """Best-first search for a start-to-target node path of ``agent``.

    Paths minimize, in order, the number of distinct other agents whose start
    or target they pass and the number of nodes.  ``available`` restricts
    which agents' nodes may be entered (empty or ``None`` means all);
    ``avoid`` forbids agents outright and wins over ``available``.  Agents in
    ``free_of_charge`` may be visited without adding to the first cost term.

    Returns ``None`` when the constraints leave no path.
    """
    allowed = _allowed_fn(graph, agent, available, avoid)
    node_agent = graph.node_agent
    adjacency = graph.adjacency
    free_of_charge = set(free_of_charge)
    source, goal = graph.start_node(agent), graph.target_node(agent)

    best: dict[int, tuple[int, int]] = {source: (0, 1)}
    visited: dict[int, frozenset[int]] = {source: frozenset()}
    parent: dict[int, int] = {}
    closed: set[int] = set()
    heap = [(0, 1, source)]
    while heap:
        count, length, u = heapq.heappop(heap)
        if u in closed:
            continue
        closed.add(u)
        if u == goal:
            nodes = [u]
            while nodes[-1] != source:
                nodes.append(parent[nodes[-1]])
            return DependencePath(agent, tuple(reversed(nodes)))
        seen = visited[u]
        for v in adjacency[u]:
            if v in closed or not allowed(v):
                continue
            b = node_agent[v]
            if b >= 0 and b != agent and b not in seen and b not in free_of_charge:
                new_seen = seen | {b}
            else:
                new_seen = seen
            cost = (len(new_seen), length + 1)
            if v not in best or cost < best[v]:
                best[v] = cost
                visited[v] = new_seen
                parent[v] = u
                heapq.heappush(heap, (cost[0], cost[1], v))
    return None


def path_exists(
    agent: int,
    graph: ConnectivityGraph,
    available: Collection[int] | None = None,
    avoid: Collection[int] = (),
) -> bool:
    """Breadth-first existence check with the same constraint semantics as the search."""
    allowed = _allowed_fn(graph, agent, available, avoid)
    adjacency = graph.adjacency
    source, goal = graph.start_node(agent), graph.target_node(agent)
    seen = {source}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if u == goal:
            return True
        for v in adjacency[u]:
            if v not in seen and allowed(v):
                seen.add(v)
                queue.append(v)
    return False


def agents_connected_within(graph: ConnectivityGraph, agents: Iterable[int]) -> dict[int, bool]:
    """For each agent of the set, whether it has a path using only the set's start/target nodes.

    A single component labelling of the induced subgraph answers the question
    for every member at once.
    """
    members = set(agents)
    node_agent = graph.node_agent
    adjacency = graph.adjacency
    comp: dict[int, int] = {}
    result = {}
    for a in sorted(members):
        s = graph.start_node(a)
        if s not in comp:
            label = s
            comp[s] = label
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for v in adjacency[u]:
                    if v in comp:
                        continue
                    b = node_agent[v]
                    if b < 0 or b in members:
                        comp[v] = label
                        queue.append(v)
        result[a] = comp.get(graph.target_node(a)) == comp[s]
    return result


def agents_on_path(path: DependencePath, graph: ConnectivityGraph) -> set[tuple[int, NodeKind]]:
    """Start/target nodes of other agents that ``path`` passes through."""
    out = set()
    for n in path.nodes:
        node = graph.node(n)
        if node.kind is not NodeKind.FREE and node.ref != path.agent:
            out.add((node.ref, node.kind))
    return out


def visited_agents(path: DependencePath, graph: ConnectivityGraph) -> set[int]:
    return {a for a, _ in agents_on_path(path, graph)}
