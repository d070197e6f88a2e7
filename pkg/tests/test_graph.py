import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgepriv import graph
from edgepriv.graph import GraphError

from _util import bfs_strongly_connected


def test_demo_graph_is_valid():
    g = graph.demo_graph()
    assert graph.validate(g).ok
    assert g.n == 5 and len(g.edges) == 8
    assert graph.epsilon_bound(g) == 0.5


def test_adjacency_orientation():
    g = graph.build(3, [(1, 2), (2, 3), (3, 1)])
    # row = receiver, column = sender
    assert g.adjacency[1, 0] == 1 and g.adjacency[0, 1] == 0
    assert g.has_edge(1, 2) and not g.has_edge(2, 1)
    assert g.out_neighbors(1) == [2]
    assert g.in_neighbors(1) == [3]


def test_laplacian_rows_and_columns_sum_to_zero_when_balanced():
    L = graph.laplacian(graph.demo_graph())
    assert np.allclose(L.sum(axis=1), 0)
    assert np.allclose(L.sum(axis=0), 0)


def test_path_is_unbalanced_and_not_strongly_connected():
    g = graph.build(3, [(1, 2), (2, 3)])
    rep = graph.validate(g)
    assert not rep.ok
    assert rep.unbalanced == [1, 3]
    assert (3, 1) in rep.unreachable
    with pytest.raises(GraphError, match="unbalanced"):
        graph.require_valid(g)


def test_balanced_but_disconnected():
    edges = [(1, 2), (2, 1), (3, 4), (4, 3)]
    rep = graph.validate(graph.build(4, edges))
    assert rep.unbalanced == []
    assert rep.unreachable and not rep.ok


@pytest.mark.parametrize(
    "n, edges, msg",
    [
        (2, [(1, 2), (2, 1)], "at least 3"),
        (3, [(1, 1)], "self-loop"),
        (3, [(1, 4)], "outside"),
        (3, [(1, 2), (1, 2)], "duplicate"),
    ],
)
def test_build_rejects(n, edges, msg):
    with pytest.raises(GraphError, match=msg):
        graph.build(n, edges)


def test_scc_agrees_with_bfs_on_random_graphs():
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(3, 9))
        mask = rng.random((n, n)) < rng.uniform(0.1, 0.6)
        edges = [(i + 1, j + 1) for i in range(n) for j in range(n) if i != j and mask[i, j]]
        g = graph.build(n, edges)
        strongly = not graph.validate(g).unreachable
        mismatches += strongly != bfs_strongly_connected(n, edges)
    assert mismatches == 0


@settings(max_examples=200, deadline=None)
@given(st.integers(3, 12), st.integers(0, 2**32 - 1))
def test_random_balanced_is_always_valid(n, seed):
    g = graph.random_balanced(n, np.random.default_rng(seed))
    assert graph.validate(g).ok
    assert np.array_equal(g.in_degree, g.out_degree)


def test_ring_and_pendant_pair():
    assert graph.validate(graph.ring(3)).ok
    g = graph.pendant_pair_graph(6, attacker=2)
    assert graph.validate(g).ok
    assert g.in_neighbors(6) == [2] and g.out_neighbors(6) == [2]
    with pytest.raises(GraphError):
        graph.pendant_pair_graph(3)


def test_merge_nodes_collapses_group():
    g = graph.demo_graph()
    merged, mapping = graph.merge_nodes(g, [3, 4])
    assert merged.n == 4
    assert mapping[3] == mapping[4] == 4
    assert merged.has_edge(mapping[2], 4) and merged.has_edge(4, mapping[5])
    assert all(i != j for i, j in merged.edges)


def test_load_json_and_edge_list(tmp_path):
    g = graph.demo_graph()
    p = tmp_path / "g.json"
    p.write_text(json.dumps(g.to_dict()))
    assert graph.load(p) == g
    q = tmp_path / "g.txt"
    q.write_text("# demo\n" + "\n".join(f"{i} {j}" for i, j in g.edges) + "\n")
    assert graph.load(q) == g
    with pytest.raises(GraphError, match="line 1"):
        graph.parse_edge_list("1 2 3")


def test_digraph_is_immutable():
    g = graph.demo_graph()
    with pytest.raises(ValueError):
        g.adjacency[0, 0] = 1
