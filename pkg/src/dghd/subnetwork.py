"""Differential subnetwork detection by greedy node removal (dGHD / dHD).

Starting from the full node set, every step tests the two induced networks,
scores each remaining node by how much its removal raises the mean-centred
GHD, and drops the highest-scoring node(s).  After the sweep the p-value
sequence is FDR-adjusted and the largest node set whose adjusted p-value
exceeds ``alpha`` is returned.

Node scores are exact but incremental: removing node ``i`` only changes the
topological overlap of pairs touching a neighbour of ``i``, and those changes
have a closed form in terms of cached common-neighbour counts and degrees.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .graph import (
    ADJACENCY,
    TOPOLOGICAL_OVERLAP,
    DegenerateInputError,
    LabeledGraph,
    check_aligned,
    weights,
)
from .stats import ghd, moments_from_sums, permutation_moments, standardize


@dataclass(frozen=True)
class DetectionConfig:
    alpha: float = 0.05
    n_min: int = 10
    batch: int = 1
    scheme: str = TOPOLOGICAL_OVERLAP
    adjust: str = "BH"

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.n_min < 4:
            raise ValueError("n_min must be at least 4")
        if self.batch < 1:
            raise ValueError("batch must be at least 1")
        if self.scheme not in (TOPOLOGICAL_OVERLAP, ADJACENCY):
            raise ValueError(f"unknown weight scheme {self.scheme!r}")
        if self.adjust not in ADJUST_METHODS:
            raise ValueError(f"unknown adjustment {self.adjust!r}; use one of {ADJUST_METHODS}")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "n_min": self.n_min, "batch": self.batch,
                "scheme": self.scheme, "adjust": self.adjust}


@dataclass
class DetectionStep:
    k: int
    removed: tuple
    statistic: float
    mu: float
    sigma2: float
    z: float
    p_raw: float
    p_adjusted: float = float("nan")
    delta_max: float = float("nan")
    delta_removed: tuple = ()
    forced: bool = False


@dataclass
class DetectionTrace:
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    @property
    def sizes(self):
        return [s.k for s in self.steps]

    @property
    def p_raw(self):
        return np.array([s.p_raw for s in self.steps])

    @property
    def p_adjusted(self):
        return np.array([s.p_adjusted for s in self.steps])

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["K", "removed_labels", "statistic", "mu", "sigma2", "z", "p_raw", "p_adj"])
            for s in self.steps:
                w.writerow([s.k, ";".join(s.removed), repr(s.statistic), repr(s.mu),
                            repr(s.sigma2), repr(s.z), repr(s.p_raw), repr(s.p_adjusted)])


# -- multiple testing ------------------------------------------------------

def _bh(p: np.ndarray) -> np.ndarray:
    m = len(p)
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adj = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adj, 1.0)
    return out


def _bonferroni(p: np.ndarray) -> np.ndarray:
    return np.minimum(p * len(p), 1.0)


ADJUST_METHODS = ("BH", "bonferroni", "none")


def adjust_pvalues(p, method: str = "BH") -> np.ndarray:
    """Multiplicity-adjust a p-value sequence; NaN entries pass through untouched."""
    p = np.asarray(p, dtype=np.float64)
    out = p.copy()
    ok = ~np.isnan(p)
    if not ok.any() or method == "none":
        return out
    if method == "BH":
        out[ok] = _bh(p[ok])
    elif method == "bonferroni":
        out[ok] = _bonferroni(p[ok])
    else:
        raise ValueError(f"unknown adjustment {method!r}")
    return out


# -- incremental removal state ---------------------------------------------

@numba.njit(cache=True)
def _overlap_weights(adj, common, deg):
    """TO weights (zero diagonal) and the one-sided removal changes.

    ``u[j, k]`` is the change of ``a_jk`` when ``j`` loses a neighbour other
    than ``k``: the denominator ``min(d_j, d_k) + 1 - A_jk`` drops by one iff
    ``d_j <= d_k``; the numerator is unchanged.
    """
    n = adj.shape[0]
    w = np.zeros((n, n))
    u = np.zeros((n, n))
    for j in range(n):
        for k in range(n):
            if j == k:
                continue
            num = common[j, k] + adj[j, k]
            den = min(deg[j], deg[k]) + 1 - adj[j, k]
            w[j, k] = num / den
            if deg[j] <= deg[k] and den > 1:
                u[j, k] = num / (den - 1.0) - w[j, k]
    return w, u


@numba.njit(cache=True)
def _removal_corrections(a, b, adj_a, adj_b, common_a, common_b, deg_a, deg_b, u_a, u_b,
                         ru_a, ru_ab, ru_b, ru_ba, ru_aub):
    """Change in the pair sums ``Sa, Sb, Sab`` caused by removing each node.

    For candidate ``i`` only pairs with an endpoint in ``U = N_A(i) | N_B(i)``
    change.  Pairs with one endpoint outside ``U`` are handled through
    precomputed row sums of the one-sided changes; pairs inside ``U`` are
    visited once each.  The candidate's own pairs are not subtracted here.
    """
    k_nodes = a.shape[0]
    d_sa = np.zeros(k_nodes)
    d_sb = np.zeros(k_nodes)
    d_sab = np.zeros(k_nodes)
    nbr = np.empty(k_nodes, dtype=np.int64)
    xs = np.empty(k_nodes, dtype=np.uint8)
    ys = np.empty(k_nodes, dtype=np.uint8)
    acc = np.empty((k_nodes, 5))
    for i in range(k_nodes):
        m = 0
        for k in range(k_nodes):
            if adj_a[i, k] or adj_b[i, k]:
                nbr[m] = k
                xs[m] = adj_a[i, k]
                ys[m] = adj_b[i, k]
                m += 1
        for p in range(m):
            j = nbr[p]
            acc[p, 0] = ru_a[j] - u_a[j, i]
            acc[p, 1] = ru_ab[j] - u_a[j, i] * b[j, i]
            acc[p, 2] = ru_b[j] - u_b[j, i]
            acc[p, 3] = ru_ba[j] - u_b[j, i] * a[j, i]
            acc[p, 4] = ru_aub[j] - u_a[j, i] * u_b[j, i]
        sa_tot = 0.0
        sb_tot = 0.0
        sab_tot = 0.0
        for p in range(m):
            j = nbr[p]
            xj = xs[p]
            yj = ys[p]
            for q in range(p + 1, m):
                k = nbr[q]
                xk = xs[q]
                yk = ys[q]
                ajk = a[j, k]
                bjk = b[j, k]
                ujk = u_a[j, k]
                ukj = u_a[k, j]
                vjk = u_b[j, k]
                vkj = u_b[k, j]
                acc[p, 0] -= ujk
                acc[q, 0] -= ukj
                acc[p, 1] -= ujk * bjk
                acc[q, 1] -= ukj * bjk
                acc[p, 2] -= vjk
                acc[q, 2] -= vkj
                acc[p, 3] -= vjk * ajk
                acc[q, 3] -= vkj * ajk
                acc[p, 4] -= ujk * vjk
                acc[q, 4] -= ukj * vkj
                if xj and xk:
                    # both lose the common neighbour i
                    da = (common_a[j, k] + adj_a[j, k] - 1.0) / (
                        min(deg_a[j], deg_a[k]) - adj_a[j, k]) - ajk
                elif xj:
                    da = ujk
                elif xk:
                    da = ukj
                else:
                    da = 0.0
                if yj and yk:
                    db = (common_b[j, k] + adj_b[j, k] - 1.0) / (
                        min(deg_b[j], deg_b[k]) - adj_b[j, k]) - bjk
                elif yj:
                    db = vjk
                elif yk:
                    db = vkj
                else:
                    db = 0.0
                # ordered pairs (j, k) and (k, j)
                sa_tot += 2.0 * da
                sb_tot += 2.0 * db
                sab_tot += 2.0 * (da * bjk + ajk * db + da * db)
        for p in range(m):
            # pairs (j, k), (k, j) with k outside U and k != i
            if xs[p]:
                sa_tot += 2.0 * acc[p, 0]
                sab_tot += 2.0 * acc[p, 1]
            if ys[p]:
                sb_tot += 2.0 * acc[p, 2]
                sab_tot += 2.0 * acc[p, 3]
            if xs[p] and ys[p]:
                sab_tot += 2.0 * acc[p, 4]
        d_sa[i] = sa_tot
        d_sb[i] = sb_tot
        d_sab[i] = sab_tot
    return d_sa, d_sb, d_sab


@numba.njit(cache=True)
def _drop_common_neighbour(common, adj, r):
    """Remove node ``r`` as a shared neighbour from the common-neighbour counts."""
    n = adj.shape[0]
    nbr = np.empty(n, dtype=np.int64)
    m = 0
    for k in range(n):
        if adj[r, k]:
            nbr[m] = k
            m += 1
    for p in range(m):
        for q in range(m):
            if p != q:
                common[nbr[p], nbr[q]] -= 1


def centered_delta(sa, sb, sab, k):
    """Mean-centred GHD on ``k`` nodes from raw pair sums: ``-2 cov / M``."""
    m = k * (k - 1)
    return -2.0 * (sab - sa * sb / m) / m


class PairState:
    """Weights and caches for a pair of graphs restricted to the surviving nodes."""

    def __init__(self, ga: LabeledGraph, gb: LabeledGraph, scheme: str = TOPOLOGICAL_OVERLAP):
        check_aligned(ga, gb)
        self.scheme = scheme
        self.labels = np.array(ga.labels, dtype=object)
        self.nodes = np.arange(ga.n)
        self.adj_a = np.ascontiguousarray(ga.adjacency, dtype=np.uint8)
        self.adj_b = np.ascontiguousarray(gb.adjacency, dtype=np.uint8)
        if scheme == TOPOLOGICAL_OVERLAP:
            self.common_a = self._common(self.adj_a)
            self.common_b = self._common(self.adj_b)
        self._refresh()

    @staticmethod
    def _common(adj):
        f = adj.astype(np.float64)
        c = (f @ f).astype(np.int32)
        np.fill_diagonal(c, 0)
        return c

    @property
    def k(self) -> int:
        return len(self.nodes)

    def _refresh(self):
        self.deg_a = self.adj_a.sum(axis=1, dtype=np.int64)
        self.deg_b = self.adj_b.sum(axis=1, dtype=np.int64)
        if self.scheme == TOPOLOGICAL_OVERLAP:
            self.w_a, self.u_a = _overlap_weights(self.adj_a, self.common_a, self.deg_a)
            self.w_b, self.u_b = _overlap_weights(self.adj_b, self.common_b, self.deg_b)
        else:
            self.w_a = self.adj_a.astype(np.float64)
            self.w_b = self.adj_b.astype(np.float64)
        self.row_a = self.w_a.sum(axis=1)
        self.row_b = self.w_b.sum(axis=1)
        self.row_ab = np.einsum("ij,ij->i", self.w_a, self.w_b)
        self.s_a = float(self.row_a.sum())
        self.s_b = float(self.row_b.sum())
        self.s_ab = float(self.row_ab.sum())

    def test(self):
        """GHD statistic, permutation moments, z and p for the current node set."""
        k = self.k
        m = k * (k - 1)
        mean_a, mean_b = self.s_a / m, self.s_b / m
        s2a = float(np.einsum("ij,ij->", self.w_a, self.w_a)) - self.s_a * mean_a
        s2b = float(np.einsum("ij,ij->", self.w_b, self.w_b)) - self.s_b * mean_b
        ra = self.row_a - (k - 1) * mean_a
        rb = self.row_b - (k - 1) * mean_b
        cross = self.s_ab - self.s_a * mean_b
        stat = (s2a + s2b - 2.0 * cross) / m
        mom = moments_from_sums(k, 0.0, s2a, float(ra @ ra), 0.0, s2b, float(rb @ rb))
        z, p_lo, _, ok = standardize(stat, mom)
        return stat, mom, z, (p_lo if ok else float("nan"))

    def delta(self) -> float:
        return centered_delta(self.s_a, self.s_b, self.s_ab, self.k)

    def influences(self) -> np.ndarray:
        """``delta_i`` for every surviving node, in current order."""
        k = self.k
        if k < 5:
            raise DegenerateInputError("node influence needs at least 5 nodes")
        if self.scheme == TOPOLOGICAL_OVERLAP:
            u_a, u_b = self.u_a, self.u_b
            d_sa, d_sb, d_sab = _removal_corrections(
                self.w_a, self.w_b, self.adj_a, self.adj_b, self.common_a, self.common_b,
                self.deg_a, self.deg_b, u_a, u_b,
                u_a.sum(axis=1), np.einsum("ij,ij->i", u_a, self.w_b),
                u_b.sum(axis=1), np.einsum("ij,ij->i", u_b, self.w_a),
                np.einsum("ij,ij->i", u_a, u_b),
            )
        else:
            # adjacency weights of the surviving pairs do not change
            d_sa = d_sb = d_sab = np.zeros(k)
        sa = self.s_a - 2.0 * self.row_a + d_sa
        sb = self.s_b - 2.0 * self.row_b + d_sb
        sab = self.s_ab - 2.0 * self.row_ab + d_sab
        return centered_delta(sa, sb, sab, k - 1) - self.delta()

    def remove(self, positions) -> None:
        positions = np.asarray(positions, dtype=np.intp)
        keep = np.ones(self.k, dtype=bool)
        keep[positions] = False
        if self.scheme == TOPOLOGICAL_OVERLAP:
            for r in positions:
                _drop_common_neighbour(self.common_a, self.adj_a, r)
                _drop_common_neighbour(self.common_b, self.adj_b, r)
            self.common_a = self.common_a[keep][:, keep]
            self.common_b = self.common_b[keep][:, keep]
        self.adj_a = self.adj_a[keep][:, keep]
        self.adj_b = self.adj_b[keep][:, keep]
        self.nodes = self.nodes[keep]
        self._refresh()


# -- from-scratch reference ------------------------------------------------

def centered_ghd(ga: LabeledGraph, gb: LabeledGraph, nodes=None, scheme: str = TOPOLOGICAL_OVERLAP) -> float:
    """GHD minus its permutation mean on the subgraphs induced by ``nodes``.

    Weights are recomputed on the induced subgraphs.
    """
    check_aligned(ga, gb)
    idx = np.arange(ga.n) if nodes is None else np.asarray(sorted(nodes), dtype=np.intp)
    if len(idx) < 4:
        raise DegenerateInputError("centred GHD needs at least 4 nodes")
    wa = weights(ga.subgraph(idx), scheme)
    wb = weights(gb.subgraph(idx), scheme)
    return ghd(wa, wb) - permutation_moments(wa, wb).mu


def node_influence(ga, gb, nodes, i: int, scheme: str = TOPOLOGICAL_OVERLAP) -> float:
    """Change in the centred GHD when node ``i`` leaves ``nodes`` (recomputed from scratch)."""
    nodes = sorted(nodes)
    if len(nodes) < 5:
        raise DegenerateInputError("node influence needs at least 5 nodes")
    if i not in nodes:
        raise ValueError(f"node {i} is not in the node set")
    rest = [v for v in nodes if v != i]
    return centered_ghd(ga, gb, rest, scheme) - centered_ghd(ga, gb, nodes, scheme)


# -- the sweep --------------------------------------------------------------

@dataclass
class DetectionResult:
    nodes: np.ndarray
    labels: tuple
    trace: DetectionTrace
    k_star: int | None

    def __iter__(self):
        # allows ``vstar, trace = detect(...)``
        yield self.labels
        yield self.trace


def _choose(deltas: np.ndarray, count: int):
    order = np.argsort(-deltas, kind="stable")
    chosen = order[:count]
    return chosen, bool(np.any(deltas[chosen] <= 0))


def detect(ga: LabeledGraph, gb: LabeledGraph, cfg: DetectionConfig | None = None,
           on_step=None, on_scores=None) -> DetectionResult:
    """Detect a differential subnetwork by greedy removal of influential nodes.

    Ties in node influence go to the smallest node index.  When no node has
    positive influence the largest one is removed anyway and the step is
    marked ``forced``, so the sweep always reaches ``n_min``.

    ``on_step(step)`` is called after each recorded step and
    ``on_scores(nodes, deltas)`` with the surviving original node indices
    and their scores before each removal.
    """
    cfg = cfg or DetectionConfig()
    check_aligned(ga, gb)
    n = ga.n
    if cfg.n_min >= n:
        raise ValueError(f"n_min={cfg.n_min} must be smaller than the network size {n}")
    state = PairState(ga, gb, cfg.scheme)
    trace = DetectionTrace()
    removal_order: list[np.ndarray] = []
    while True:
        stat, mom, z, p = state.test()
        k = state.k
        step = DetectionStep(k, (), stat, mom.mu, mom.sigma2, z, p)
        if k == cfg.n_min:
            trace.steps.append(step)
            break
        deltas = state.influences()
        if on_scores is not None:
            on_scores(state.nodes.copy(), deltas.copy())
        chosen, forced = _choose(deltas, min(cfg.batch, k - cfg.n_min))
        gone = state.nodes[chosen]
        step.removed = tuple(str(x) for x in state.labels[gone])
        step.delta_max = float(deltas.max())
        step.delta_removed = tuple(float(x) for x in deltas[chosen])
        step.forced = forced
        trace.steps.append(step)
        removal_order.append(gone)
        if on_step is not None:
            on_step(step)
        state.remove(chosen)

    adj = adjust_pvalues(trace.p_raw, cfg.adjust)
    for s, q in zip(trace.steps, adj):
        s.p_adjusted = float(q)
    k_star = None
    for idx, s in enumerate(trace.steps):
        if not math.isnan(s.p_adjusted) and s.p_adjusted > cfg.alpha:
            k_star = idx
            break
    if k_star is None:
        nodes = np.empty(0, dtype=np.intp)
    else:
        dropped = np.concatenate(removal_order[:k_star]) if k_star else np.empty(0, dtype=np.intp)
        nodes = np.setdiff1d(np.arange(n), dropped)
    labels = tuple(ga.labels[i] for i in nodes)
    return DetectionResult(nodes, labels, trace, None if k_star is None else trace.steps[k_star].k)


def detect_dhd(ga, gb, cfg: DetectionConfig | None = None, on_step=None, on_scores=None) -> DetectionResult:
    """dGHD sweep on adjacency weights (Hamming-distance variant)."""
    cfg = cfg or DetectionConfig()
    cfg = DetectionConfig(cfg.alpha, cfg.n_min, cfg.batch, ADJACENCY, cfg.adjust)
    return detect(ga, gb, cfg, on_step, on_scores)
