from itertools import permutations

import numpy as np
import pytest
from scipy import stats as sps

from dghd.baselines import (
    cug_null,
    cug_test,
    gcor,
    mad,
    mad_test,
    permutation_test,
    qap,
    qap_test,
    run_baseline,
)
from dghd.graph import DegenerateInputError, LabeledGraph
from dghd.netgen import erdos_renyi, make_rng, random_geometric

LABELS = ["a", "b", "c"]
K3 = LabeledGraph.from_edges([("a", "b"), ("b", "c"), ("a", "c")], LABELS)
EMPTY3 = LabeledGraph.empty(3, LABELS)
EDGE3 = LabeledGraph.from_edges([("a", "b")], LABELS)


def test_mad_examples():
    assert mad(K3, K3) == 0
    assert mad(K3, EMPTY3) == 1
    g1 = LabeledGraph.from_edges([("a", "b")], "abcd")
    g2 = LabeledGraph.from_edges([("a", "b"), ("c", "d")], "abcd")
    assert mad(g1, g2) == pytest.approx(1 / 6)


def test_qap_examples():
    assert qap(K3, EMPTY3) == 0
    assert qap(K3, K3) == 1
    assert qap(K3, EDGE3) == pytest.approx(1 / 3)


def test_gcor_examples():
    g = erdos_renyi(20, 0.3, seed=0)
    a = g.adjacency.astype(float)
    off = ~np.eye(20, dtype=bool)
    expected = np.sum((a[off] - a[off].mean()) ** 2)
    assert gcor(g, g) == pytest.approx(expected)
    comp = LabeledGraph(g.labels, (1 - np.eye(20, dtype=np.uint8)) - g.adjacency)
    assert gcor(g, comp) == pytest.approx(-expected)
    with pytest.raises(DegenerateInputError):
        gcor(K3, EDGE3)


def test_gcor_independent_graphs_near_zero():
    ga = erdos_renyi(100, 0.1, seed=1)
    gb = erdos_renyi(100, 0.1, seed=2)
    null = cug_null(100, ga.n_edges, gb.n_edges, 2000, make_rng(0))
    assert abs(gcor(ga, gb)) < 3 * null.std()


def test_identical_graphs_hit_the_floor():
    g = random_geometric(40, 0.3, seed=3)
    for res in (mad_test(g, g, 200, 1), qap_test(g, g, 200, 1), cug_test(g, g, 200, 1)):
        assert res.p_value == pytest.approx(1 / 201)


def test_mad_and_qap_share_overlap_ordering():
    ga = random_geometric(30, 0.3, seed=1)
    gb = random_geometric(30, 0.3, seed=2)
    assert mad_test(ga, gb, 300, 5).p_value == qap_test(ga, gb, 300, 5).p_value


def test_mad_against_exhaustive_n7():
    ga = erdos_renyi(7, 0.5, seed=21)
    gb = erdos_renyi(7, 0.5, seed=22)
    obs = mad(ga, gb)
    vals = np.array([mad(LabeledGraph(ga.labels, ga.adjacency[np.ix_(p, p)]), gb)
                     for p in permutations(range(7))])
    exact = np.mean(vals <= obs + 1e-12)
    res = mad_test(ga, gb, n_perm=5000, seed=3)
    se = np.sqrt(exact * (1 - exact) / 5000)
    assert abs(res.p_value - exact) <= 3 * se + 1 / 5001


def test_cug_count_sampler_matches_graph_sampler():
    rng1, rng2 = make_rng(1), make_rng(2)
    fast = cug_null(30, 80, 120, 1500, rng1)
    slow = cug_null(30, 80, 120, 1500, rng2, method="graphs")
    assert sps.ks_2samp(fast, slow).pvalue > 0.001


def test_cug_degenerate_flagged():
    res = cug_test(K3, EDGE3, 100, 0)
    assert not res.defined and np.isnan(res.p_value)


def test_permutation_pvalues_roughly_uniform_under_independence():
    ps = []
    for k in range(60):
        ga = erdos_renyi(25, 0.2, seed=(k, 0))
        gb = erdos_renyi(25, 0.2, seed=(k, 1))
        ps.append(permutation_test("QAP", ga, gb, 200, k).p_value)
    assert sps.kstest(ps, "uniform").pvalue > 0.001


def test_run_baseline_rejects_unknown_method():
    with pytest.raises(ValueError, match="MAD"):
        run_baseline("XYZ", K3, K3)
    with pytest.raises(ValueError):
        mad_test(K3, K3, n_perm=10)
