"""Competing two-network tests: MAD and QAP permutation tests, and CUG."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import DegenerateInputError, LabeledGraph, check_aligned
from .netgen import erdos_renyi, make_rng

METHODS = ("MAD", "QAP", "CUG")


@dataclass(frozen=True)
class BaselineResult:
    method: str
    statistic: float
    p_value: float
    n_draws: int
    seed: int
    defined: bool = True

    def to_record(self) -> dict:
        return {
            "method": self.method,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n_draws": self.n_draws,
            "seed": self.seed,
        }


def _adj(ga: LabeledGraph, gb: LabeledGraph):
    check_aligned(ga, gb)
    return ga.adjacency.astype(np.float64), gb.adjacency.astype(np.float64)


def mad(ga: LabeledGraph, gb: LabeledGraph) -> float:
    """Mean absolute difference of adjacency entries over ordered pairs."""
    a, b = _adj(ga, gb)
    n = a.shape[0]
    return float(np.abs(a - b).sum()) / (n * (n - 1))


def qap(ga: LabeledGraph, gb: LabeledGraph) -> float:
    """Mean product of adjacency entries over ordered pairs."""
    a, b = _adj(ga, gb)
    n = a.shape[0]
    return float((a * b).sum()) / (n * (n - 1))


def _gcor_from_counts(ea, eb, overlap, n_pairs):
    # ordered-pair sums are twice the unordered counts
    return 2.0 * (overlap - ea * eb / n_pairs)


def gcor(ga: LabeledGraph, gb: LabeledGraph) -> float:
    """Unnormalised graph covariance ``sum_{i!=j} (a_ij - a_bar)(b_ij - b_bar)``."""
    a, b = _adj(ga, gb)
    n = a.shape[0]
    m = n * (n - 1)
    for g, x in (("first", a), ("second", b)):
        s = x.sum()
        if s == 0 or s == m:
            raise DegenerateInputError(f"graph correlation undefined: {g} graph is empty or complete")
    np.fill_diagonal(a, np.nan)
    np.fill_diagonal(b, np.nan)
    da = a - np.nanmean(a)
    db = b - np.nanmean(b)
    return float(np.nansum(da * db))


def _overlap_counts(ga: LabeledGraph, gb: LabeledGraph, n_perm: int, rng, chunk: int = 256):
    """Edge overlap of ``gb`` with ``n_perm`` random relabellings of ``ga``."""
    n = ga.n
    eu, ev = np.nonzero(np.triu(ga.adjacency, 1))
    b = gb.adjacency
    out = np.empty(n_perm, dtype=np.int64)
    for start in range(0, n_perm, chunk):
        stop = min(start + chunk, n_perm)
        perms = np.array([rng.permutation(n) for _ in range(stop - start)])
        out[start:stop] = b[perms[:, eu], perms[:, ev]].sum(axis=1, dtype=np.int64)
    return out


def permutation_test(statistic: str, ga: LabeledGraph, gb: LabeledGraph, n_perm: int = 1000,
                     seed: int = 0) -> BaselineResult:
    """Permutation test of independence in the association direction.

    For binary graphs both statistics are affine in the edge overlap
    ``X = |E_A & E_B|``::

        MAD * N(N-1) = 2|E_A| + 2|E_B| - 4X,    QAP * N(N-1) = 2X

    so each relabelling only needs its overlap count.  MAD rejects for small
    values, QAP for large ones.
    """
    statistic = statistic.upper()
    if statistic not in ("MAD", "QAP"):
        raise ValueError(f"unknown permutation statistic {statistic!r}; use MAD or QAP")
    if n_perm < 100:
        raise ValueError("n_perm must be at least 100")
    check_aligned(ga, gb)
    n = ga.n
    m = n * (n - 1)
    ea, eb = ga.n_edges, gb.n_edges
    obs_x = int(np.sum(np.triu(ga.adjacency, 1) & np.triu(gb.adjacency, 1)))
    xs = _overlap_counts(ga, gb, n_perm, make_rng(seed))
    if statistic == "MAD":
        stat = (2 * ea + 2 * eb - 4 * obs_x) / m
        # MAD_perm <= MAD_obs  <=>  X_perm >= X_obs
        hits = int(np.count_nonzero(xs >= obs_x))
    else:
        stat = 2 * obs_x / m
        hits = int(np.count_nonzero(xs >= obs_x))
    return BaselineResult(statistic, stat, (1 + hits) / (n_perm + 1), n_perm, seed)


def mad_test(ga, gb, n_perm=1000, seed=0) -> BaselineResult:
    return permutation_test("MAD", ga, gb, n_perm, seed)


def qap_test(ga, gb, n_perm=1000, seed=0) -> BaselineResult:
    return permutation_test("QAP", ga, gb, n_perm, seed)


def cug_null(n: int, ea: int, eb: int, n_sim: int, rng, condition: str = "density",
             method: str = "counts") -> np.ndarray:
    """Draws of ``gcor`` for independent random graphs matching size and density.

    ``method="counts"`` samples the sufficient statistics directly: edge
    counts (binomial, or fixed when ``condition="edges"``) and their overlap,
    which is hypergeometric given the counts.  ``method="graphs"`` builds the
    random graphs explicitly and is much slower; both give the same law.
    """
    n_pairs = n * (n - 1) // 2
    if condition not in ("density", "edges"):
        raise ValueError(f"unknown CUG conditioning {condition!r}")
    if method == "graphs":
        if condition != "density":
            raise ValueError("graph simulation is only implemented for density conditioning")
        pa, pb = ea / n_pairs, eb / n_pairs
        out = np.empty(n_sim)
        for k in range(n_sim):
            sa = erdos_renyi(n, pa, rng)
            sb = erdos_renyi(n, pb, rng)
            xa, xb = sa.n_edges, sb.n_edges
            x = int(np.sum(np.triu(sa.adjacency, 1) & np.triu(sb.adjacency, 1)))
            out[k] = _gcor_from_counts(xa, xb, x, n_pairs)
        return out
    if method != "counts":
        raise ValueError(f"unknown CUG simulation method {method!r}")
    if condition == "density":
        sa = rng.binomial(n_pairs, ea / n_pairs, size=n_sim)
        sb = rng.binomial(n_pairs, eb / n_pairs, size=n_sim)
    else:
        sa = np.full(n_sim, ea)
        sb = np.full(n_sim, eb)
    x = rng.hypergeometric(sa, n_pairs - sa, sb)
    return _gcor_from_counts(sa.astype(np.float64), sb.astype(np.float64), x, n_pairs)


def cug_test(ga: LabeledGraph, gb: LabeledGraph, n_sim: int = 1000, seed: int = 0,
             condition: str = "density", method: str = "counts") -> BaselineResult:
    """Conditional uniform graph test on the graph correlation (two-sided)."""
    if n_sim < 100:
        raise ValueError("n_sim must be at least 100")
    check_aligned(ga, gb)
    try:
        obs = gcor(ga, gb)
    except DegenerateInputError:
        return BaselineResult("CUG", float("nan"), float("nan"), n_sim, seed, defined=False)
    null = cug_null(ga.n, ga.n_edges, gb.n_edges, n_sim, make_rng(seed), condition, method)
    tol = 1e-9 * max(abs(obs), 1.0)
    hits = int(np.count_nonzero(np.abs(null) >= abs(obs) - tol))
    return BaselineResult("CUG", obs, (1 + hits) / (n_sim + 1), n_sim, seed)


def run_baseline(method: str, ga, gb, n_draws=1000, seed=0) -> BaselineResult:
    method = method.upper()
    if method in ("MAD", "QAP"):
        return permutation_test(method, ga, gb, n_draws, seed)
    if method == "CUG":
        return cug_test(ga, gb, n_draws, seed)
    raise ValueError(f"unknown baseline {method!r}; valid: {', '.join(METHODS)}")


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)
