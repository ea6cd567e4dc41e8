import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import grid_from_rows, random_instance
from mapfdecomp.connectivity import (
    NodeKind,
    agents_connected_within,
    agents_on_path,
    build_connectivity_graph,
    path_exists,
    search_dependence_path,
    visited_agents,
)
from mapfdecomp.grid import GridMap, make_instance
from oracles import all_simple_paths


def labels(graph, path):
    return [graph.label(n) for n in path.nodes]


def owner_allowed(graph, agent, available=None, avoid=()):
    def allowed(n):
        b = graph.node_agent[n]
        if b < 0 or b == agent:
            return True
        if b in avoid:
            return False
        return not available or b in available

    return allowed


def test_single_agent_open_room():
    grid = GridMap(np.ones((4, 4), dtype=bool))
    graph = build_connectivity_graph(make_instance(grid, [((0, 0), (3, 3))]))
    assert graph.num_nodes == 3
    assert sorted(graph.label(n) for n in range(3)) == ["0f", "0s", "0t"]


def test_fig2_nodes(fig2):
    graph = build_connectivity_graph(fig2)
    assert graph.num_groups == 2
    assert {graph.label(n) for n in range(graph.num_nodes)} == {"0s", "1s", "2s", "0t", "1t", "2t", "0f", "1f"}
    assert graph.node_cells(graph.start_node(1)) == {(4, 1)}
    assert graph.node_of((1, 0)) == 0 and graph.node_of((7, 1)) == 1


def test_fig2_dump(fig2):
    text = build_connectivity_graph(fig2).dump()
    lines = text.splitlines()
    assert lines[0] == "nodes 8"
    assert lines[1:9] == ["0f", "1f", "0s", "1s", "2s", "0t", "1t", "2t"]
    edges = {tuple(line.split()) for line in lines[10:]}
    assert int(lines[9].split()[1]) == len(edges)
    assert edges == {
        ("0f", "0s"), ("0f", "1t"),
        ("1f", "1s"), ("1f", "2s"), ("1f", "0t"), ("1f", "1t"), ("1f", "2t"),
        ("0t", "2t"),
    }


def test_fig2_dependence_paths(fig2):
    graph = build_connectivity_graph(fig2)
    p0, p1, p2 = (search_dependence_path(a, graph) for a in range(3))
    assert labels(graph, p0) == ["0s", "0f", "1t", "1f", "0t"]
    assert labels(graph, p1) == ["1s", "1f", "1t"]
    assert labels(graph, p2) == ["2s", "1f", "2t"]
    assert agents_on_path(p0, graph) == {(1, NodeKind.TARGET)}
    assert agents_on_path(p1, graph) == set()
    assert agents_on_path(p2, graph) == set()


def test_fig2_unavoidable_target(fig2):
    graph = build_connectivity_graph(fig2)
    assert search_dependence_path(0, graph, avoid={1}) is None
    assert not path_exists(0, graph, avoid={1})
    s, t = graph.start_node(0), graph.target_node(0)
    brute = all_simple_paths(graph.adjacency, s, t, owner_allowed(graph, 0, avoid={1}))
    assert brute == []
    # every unrestricted simple path of agent 0 visits 1t
    every = all_simple_paths(graph.adjacency, s, t, owner_allowed(graph, 0))
    assert every and all(graph.target_node(1) in p for p in every)


def test_available_restricts_and_avoid_wins(fig2):
    graph = build_connectivity_graph(fig2)
    assert search_dependence_path(0, graph, available={0}) is None
    assert search_dependence_path(0, graph, available={0, 1}) is not None
    assert search_dependence_path(0, graph, available={0, 1}, avoid={1}) is None
    with pytest.raises(ValueError):
        search_dependence_path(0, graph, avoid={0})


def test_search_prefers_agent_free_route():
    # the top route passes both of agent 1's cells, the bottom one nobody
    grid = grid_from_rows(
        ".......",
        ".@@@@@.",
        ".......",
    )
    inst = make_instance(grid, [((0, 1), (6, 1)), ((3, 0), (4, 0))])
    graph = build_connectivity_graph(inst)
    path = search_dependence_path(0, graph)
    assert visited_agents(path, graph) == set()
    # with agent 1 forced on both routes the search accepts the visit
    grid2 = grid_from_rows("...")
    inst2 = make_instance(grid2, [((0, 0), (2, 0)), ((1, 0), (1, 0))])
    graph2 = build_connectivity_graph(inst2)
    assert visited_agents(search_dependence_path(0, graph2), graph2) == {1}


def test_free_of_charge_agents_do_not_count():
    grid = grid_from_rows(
        "..........",
        ".@@@@@@@@.",
        "..........",
    )
    # the top route pays agents 1 and 2, the bottom one agent 3 only
    inst = make_instance(grid, [
        ((0, 1), (9, 1)),
        ((2, 0), (3, 0)),
        ((5, 0), (6, 0)),
        ((2, 2), (3, 2)),
    ])
    graph = build_connectivity_graph(inst)
    assert visited_agents(search_dependence_path(0, graph), graph) == {3}
    cheap = search_dependence_path(0, graph, free_of_charge={1, 2})
    assert visited_agents(cheap, graph) == {1, 2}


def test_own_start_equals_target():
    grid = GridMap(np.ones((3, 3), dtype=bool))
    inst = make_instance(grid, [((0, 0), (0, 0)), ((1, 0), (2, 2))])
    graph = build_connectivity_graph(inst)
    path = search_dependence_path(0, graph)
    assert labels(graph, path) == ["0s", "0t"]
    assert graph.node_cells(graph.start_node(0)) == frozenset()


def check_path_shape(graph, path):
    assert path.nodes[0] == graph.start_node(path.agent)
    assert path.nodes[-1] == graph.target_node(path.agent)
    for u, v in zip(path.nodes, path.nodes[1:]):
        assert v in graph.adjacency[u]
    assert len(set(path.nodes)) == len(path.nodes)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.35))
def test_node_cells_partition_passable(seed, density):
    rng = np.random.default_rng(seed)
    grid = GridMap(rng.random((8, 8)) >= density)
    inst = random_instance(grid, 3, rng)
    if inst is None:
        return
    graph = build_connectivity_graph(inst)
    covered = {}
    for n in range(graph.num_nodes):
        for c in graph.node_cells(n):
            assert c not in covered
            covered[c] = n
    assert set(covered) == {tuple(int(v) for v in c) for c in np.argwhere(grid.passable)}
    # free groups are connected and adjacent groups never touch directly
    for group in graph.free_groups():
        assert group.cells
    for u, v in graph.edges():
        assert not (u < graph.num_groups and v < graph.num_groups)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_search_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    grid = GridMap(rng.random((5, 4)) >= 0.2)
    k = int(rng.integers(2, 5))
    inst = random_instance(grid, k, rng)
    if inst is None:
        return
    graph = build_connectivity_graph(inst)
    if graph.num_nodes > 14:
        return
    for a in range(k):
        s, t = graph.start_node(a), graph.target_node(a)
        paths = all_simple_paths(graph.adjacency, s, t, owner_allowed(graph, a))
        found = search_dependence_path(a, graph)
        assert (found is None) == (not paths)
        if found is None:
            continue
        check_path_shape(graph, found)
        fewest = min(len({graph.node_agent[n] for n in p} - {-1, a}) for p in paths)
        assert len(visited_agents(found, graph)) >= fewest
        for b in range(k):
            if b == a:
                continue
            brute = any(all(graph.node_agent[n] != b for n in p) for p in paths)
            assert path_exists(a, graph, avoid={b}) == brute
            assert (search_dependence_path(a, graph, avoid={b}) is not None) == brute


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_connected_within_matches_path_exists(seed):
    rng = np.random.default_rng(seed)
    grid = GridMap(rng.random((8, 8)) >= 0.25)
    inst = random_instance(grid, 6, rng)
    if inst is None:
        return
    graph = build_connectivity_graph(inst)
    members = {a for a in range(6) if rng.random() < 0.6} or {0}
    within = agents_connected_within(graph, members)
    assert set(within) == members
    for a in members:
        assert within[a] == path_exists(a, graph, available=members)
