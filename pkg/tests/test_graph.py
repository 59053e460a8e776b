import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from dghd.graph import (
    ADJACENCY,
    TOPOLOGICAL_OVERLAP,
    DegenerateInputError,
    GraphError,
    LabeledGraph,
    align,
    center,
    check_aligned,
    degree,
    read_edgelist,
    remove_node,
    topological_overlap,
    topological_overlap_matrix,
    weights,
    write_edgelist,
)
from dghd.netgen import erdos_renyi


def naive_to(adj):
    n = len(adj)
    out = np.eye(n)
    deg = adj.sum(axis=1)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            shared = sum(adj[i, k] * adj[k, j] for k in range(n) if k not in (i, j))
            out[i, j] = (shared + adj[i, j]) / (min(deg[i], deg[j]) + 1 - adj[i, j])
    return out


def path_graph(n):
    return LabeledGraph.from_edges([(str(i), str(i + 1)) for i in range(n - 1)])


def test_from_edges_orders_labels_by_appearance():
    g = LabeledGraph.from_edges([("b", "a"), ("a", "c")])
    assert g.labels == ("b", "a", "c")
    assert g.n_edges == 2
    assert_array_equal(g.degrees(), [1, 2, 1])


def test_invalid_adjacency_rejected():
    with pytest.raises(GraphError, match="symmetric"):
        LabeledGraph(["a", "b"], [[0, 1], [0, 0]])
    with pytest.raises(GraphError, match="self-loop"):
        LabeledGraph(["a", "b"], [[1, 0], [0, 0]])
    with pytest.raises(GraphError, match="duplicate"):
        LabeledGraph(["a", "a"], np.zeros((2, 2)))
    with pytest.raises(GraphError, match="binary"):
        LabeledGraph(["a", "b"], [[0, 2], [2, 0]])
    with pytest.raises(GraphError, match="self-loop"):
        LabeledGraph.from_edges([("a", "a")])


def test_adjacency_is_read_only():
    g = path_graph(3)
    with pytest.raises(ValueError):
        g.adjacency[0, 1] = 0


def test_degree_checks_range():
    g = path_graph(4)
    assert degree(g, 1) == 2
    with pytest.raises(IndexError):
        degree(g, 4)


def test_to_matches_naive_definition():
    g = erdos_renyi(12, 0.4, seed=3)
    assert_allclose(topological_overlap_matrix(g.adjacency), naive_to(g.adjacency), atol=1e-15)


def test_to_known_values():
    # triangle: each pair shares one neighbour and is linked, min degree 2
    tri = LabeledGraph.from_edges([("a", "b"), ("b", "c"), ("a", "c")])
    w = topological_overlap(tri).values
    assert_allclose(w, np.ones((3, 3)))
    # path a-b-c: a and c share b, not linked, min degree 1
    p = path_graph(3)
    w = topological_overlap(p).values
    assert w[0, 2] == pytest.approx(1 / 2)
    # a-b: linked, no shared neighbour, min degree 1
    assert w[0, 1] == pytest.approx(1.0)


def test_to_isolated_node_is_zero_off_diagonal():
    g = LabeledGraph(["a", "b", "c"], [[0, 1, 0], [1, 0, 0], [0, 0, 0]])
    w = topological_overlap(g).values
    assert_array_equal(w[2], [0.0, 0.0, 1.0])


def test_weights_bounds_and_symmetry():
    g = erdos_renyi(30, 0.2, seed=1)
    w = weights(g, TOPOLOGICAL_OVERLAP).values
    assert np.all((w >= 0) & (w <= 1))
    assert_array_equal(w, w.T)
    assert_array_equal(weights(g, ADJACENCY).values, g.adjacency)
    with pytest.raises(ValueError):
        weights(g, "pearson")


def test_center_zero_row_sum_total_and_idempotent():
    g = erdos_renyi(15, 0.3, seed=2)
    c = center(weights(g, TOPOLOGICAL_OVERLAP))
    assert abs(c.values.sum()) < 1e-12
    assert_array_equal(np.diagonal(c.values), 0)
    assert_allclose(c.row_sums, c.values.sum(axis=1))
    assert center(c) is c


def test_center_needs_two_nodes():
    with pytest.raises(DegenerateInputError):
        center(np.zeros((1, 1)))


def test_remove_node_relabels_consistently():
    g = path_graph(5)
    h = remove_node(g, 2)
    assert h.labels == ("0", "1", "3", "4")
    assert h.n_edges == 2
    with pytest.raises(IndexError):
        remove_node(g, 7)


def test_align_reorders_second_graph():
    ga = LabeledGraph.from_edges([("a", "b"), ("b", "c")])
    gb = LabeledGraph.from_edges([("c", "b")], labels=["c", "b", "a"])
    with pytest.raises(GraphError, match="order"):
        check_aligned(ga, gb)
    _, gb2 = align(ga, gb)
    assert gb2.labels == ga.labels
    assert gb2.edges() == [("b", "c")]


def test_align_reports_symmetric_difference():
    ga = LabeledGraph.from_edges([("a", "b")])
    gb = LabeledGraph.from_edges([("a", "z")])
    with pytest.raises(GraphError, match=r"\['b', 'z'\]"):
        align(ga, gb)


def test_edgelist_round_trip_keeps_isolated_nodes(tmp_path):
    g = LabeledGraph.from_edges([("x", "y")], labels=["x", "y", "lonely"])
    p = tmp_path / "g.tsv"
    write_edgelist(g, p)
    assert read_edgelist(p) == g


def test_edgelist_parse_error_has_line_number(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("# comment\na b\na b c\n")
    with pytest.raises(GraphError, match="bad.txt:3"):
        read_edgelist(p)


def test_edgelist_unknown_endpoint_with_header(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("#nodes: a,b\na c\n")
    with pytest.raises(GraphError, match="'c'"):
        read_edgelist(p)
