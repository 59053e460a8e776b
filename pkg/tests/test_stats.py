import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from dghd.graph import ADJACENCY, DegenerateInputError, LabeledGraph, center, weights
from dghd.netgen import erdos_renyi, random_geometric
from dghd.stats import (
    exact_permutation_distribution,
    exact_pvalue,
    ghd,
    ghd_correlation_form,
    ghd_test,
    ghd_test_weights,
    hamming_distance,
    monte_carlo_pvalue,
    normality_diagnostic,
    permutation_moments,
)


def random_symmetric(n, rng):
    x = rng.random((n, n))
    x = (x + x.T) / 2
    np.fill_diagonal(x, 1.0)
    return x


def loop_ghd(a, b):
    # direct definition with explicit off-diagonal means
    n = len(a)
    off = [(i, j) for i in range(n) for j in range(n) if i != j]
    ma = sum(a[i][j] for i, j in off) / len(off)
    mb = sum(b[i][j] for i, j in off) / len(off)
    return sum(((a[i][j] - ma) - (b[i][j] - mb)) ** 2 for i, j in off) / len(off)


def test_ghd_matches_loop_definition():
    rng = np.random.default_rng(0)
    a, b = random_symmetric(6, rng), random_symmetric(6, rng)
    assert ghd(a, b) == pytest.approx(loop_ghd(a, b), abs=1e-14)
    assert ghd_correlation_form(a, b) == pytest.approx(ghd(a, b), abs=1e-14)


def test_ghd_ignores_diagonal():
    rng = np.random.default_rng(1)
    a, b = random_symmetric(5, rng), random_symmetric(5, rng)
    a2 = a.copy()
    np.fill_diagonal(a2, 7.0)
    assert ghd(a2, b) == ghd(a, b)


@pytest.mark.parametrize("n", [4, 5, 6])
def test_moments_match_loop_enumeration(n):
    rng = np.random.default_rng(n)
    a, b = random_symmetric(n, rng), random_symmetric(n, rng)
    vals = [loop_ghd(a[np.ix_(p, p)], b) for p in permutations(range(n))]
    mom = permutation_moments(a, b)
    assert mom.mu == pytest.approx(np.mean(vals), abs=1e-12)
    assert mom.sigma2 == pytest.approx(np.var(vals), abs=1e-12)


def test_exact_distribution_matches_loop():
    rng = np.random.default_rng(5)
    a, b = random_symmetric(5, rng), random_symmetric(5, rng)
    vals = [loop_ghd(a[np.ix_(p, p)], b) for p in permutations(range(5))]
    assert_allclose(exact_permutation_distribution(a, b), vals, atol=1e-14)


def test_exact_distribution_refuses_large_n():
    with pytest.raises(ValueError):
        exact_permutation_distribution(np.eye(9), np.eye(9))


def test_moments_need_four_nodes():
    with pytest.raises(DegenerateInputError):
        permutation_moments(np.eye(3), np.eye(3))


def test_identical_graphs_strongly_associated():
    g = random_geometric(80, 0.25, seed=4)
    res = ghd_test(g, g)
    assert res.statistic == 0.0
    assert res.z < -10
    assert res.p_association < 1e-20
    assert res.p_divergence == pytest.approx(1.0)


def test_constant_weights_are_degenerate_but_defined():
    # complete graphs: all centred weights vanish, every relabelling gives GHD = 0
    n = 6
    k = LabeledGraph([str(i) for i in range(n)], 1 - np.eye(n, dtype=np.uint8))
    res = ghd_test(k, k)
    assert res.sigma2 == 0
    assert res.defined and res.p_association == 1.0
    assert not res.diag_a.defined


def test_hamming_distance_counts_edges():
    ga = LabeledGraph.from_edges([("a", "b"), ("b", "c")], labels="abcd")
    gb = LabeledGraph.from_edges([("a", "b"), ("c", "d")], labels="abcd")
    assert hamming_distance(ga, gb) == 2


def test_adjacency_ghd_is_affine_in_hamming_distance():
    # with equal edge counts the centring constants cancel: M * GHD = 2 HD
    ga = erdos_renyi(12, 0.3, seed=1)
    perm = np.random.default_rng(2).permutation(12)
    gb = LabeledGraph(ga.labels, ga.adjacency[np.ix_(perm, perm)])
    m = 12 * 11
    d = ghd(weights(ga, ADJACENCY), weights(gb, ADJACENCY))
    assert d * m == pytest.approx(2 * hamming_distance(ga, gb))


def test_normality_diagnostic_formula():
    rng = np.random.default_rng(3)
    c = center(random_symmetric(7, rng))
    r = c.row_sums
    diag = normality_diagnostic(c)
    assert diag.ratio == pytest.approx(np.sum(r ** 3) ** 2 / np.sum(r ** 2) ** 3)
    assert diag.ratio <= 1.0
    assert diag.exceeds(0.0) == (diag.ratio > 0)


def test_monte_carlo_close_to_exact():
    g1 = erdos_renyi(7, 0.5, seed=11)
    g2 = erdos_renyi(7, 0.5, seed=12)
    wa, wb = weights(g1, "topological-overlap"), weights(g2, "topological-overlap")
    mc = monte_carlo_pvalue(wa, wb, n_perm=4000, seed=1)
    assert abs(mc.p_value - exact_pvalue(wa, wb)) < 4 * mc.stderr + 1e-3


def test_monte_carlo_reproducible_and_validated():
    rng = np.random.default_rng(0)
    a, b = random_symmetric(8, rng), random_symmetric(8, rng)
    assert monte_carlo_pvalue(a, b, 200, seed=3) == monte_carlo_pvalue(a, b, 200, seed=3)
    with pytest.raises(ValueError):
        monte_carlo_pvalue(a, b, n_perm=10)


def test_test_result_record_fields():
    g1 = random_geometric(40, 0.3, seed=1)
    g2 = random_geometric(40, 0.3, seed=2)
    rec = ghd_test(g1, g2).to_record()
    assert set(rec) >= {"statistic", "mu", "sigma2", "z", "p_association", "diag_a", "diag_b"}
    assert rec["p_association"] + ghd_test(g1, g2).p_divergence == pytest.approx(1.0)


@st.composite
def weight_pairs(draw):
    n = draw(st.integers(4, 9))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    return random_symmetric(n, rng), random_symmetric(n, rng), rng.permutation(n)


@settings(max_examples=40, deadline=None)
@given(weight_pairs())
def test_moments_invariant_under_relabelling(data):
    a, b, p = data
    m1 = permutation_moments(a, b)
    m2 = permutation_moments(a[np.ix_(p, p)], b)
    assert m1.mu == pytest.approx(m2.mu, abs=1e-12)
    assert m1.sigma2 == pytest.approx(m2.sigma2, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(weight_pairs())
def test_ghd_symmetric_and_shift_invariant(data):
    a, b, p = data
    assert ghd(a, b) == pytest.approx(ghd(b, a), abs=1e-14)
    assert ghd(a + 3.0, b) == pytest.approx(ghd(a, b), abs=1e-12)
    assert ghd(a[np.ix_(p, p)], b[np.ix_(p, p)]) == pytest.approx(ghd(a, b), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(weight_pairs())
def test_variance_nonnegative_and_z_finite(data):
    a, b, _ = data
    res = ghd_test_weights(a, b)
    assert res.sigma2 >= 0
    assert math.isfinite(res.z)
    assert 0 <= res.p_association <= 1
