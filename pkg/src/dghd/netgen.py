"""Random graph models, edge rewiring and planted differential subnetworks."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.spatial.distance import pdist, squareform

from .graph import LabeledGraph, default_labels

log = logging.getLogger(__name__)

MODELS = ("RG2D", "SF", "ER")


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def child_seeds(seed, count: int) -> list[np.random.SeedSequence]:
    """Independent child streams of ``seed``; ``seed`` may be an int or a SeedSequence."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(count)


def replicate_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Counter-style stream for replicate ``index``; independent of worker layout."""
    return np.random.SeedSequence([int(seed), int(index)])


@dataclass(frozen=True)
class GeneratorSpec:
    """Declarative description of a random graph model.

    ``params`` holds ``d`` for ``RG2D``, ``alpha`` for ``SF`` and ``p`` for
    ``ER``.
    """

    model: str
    n: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; valid models: {', '.join(MODELS)}")
        if self.n < 1:
            raise ValueError("n must be positive")
        p = self.params
        if self.model == "RG2D":
            d = p.get("d")
            if d is None or not 0 < d < math.sqrt(2):
                raise ValueError("RG2D needs 0 < d < sqrt(2)")
        elif self.model == "SF":
            a = p.get("alpha")
            if a is None or a <= 1:
                raise ValueError("SF needs alpha > 1")
        else:
            q = p.get("p")
            if q is None or not 0 <= q <= 1:
                raise ValueError("ER needs 0 <= p <= 1")

    def generate(self, seed=None, n=None) -> LabeledGraph:
        seed = self.seed if seed is None else seed
        n = self.n if n is None else n
        if self.model == "RG2D":
            return random_geometric(n, self.params["d"], seed)
        if self.model == "SF":
            return scale_free(n, self.params["alpha"], seed, wiring=self.params.get("wiring", "configuration"))
        return erdos_renyi(n, self.params["p"], seed)

    def to_dict(self) -> dict:
        return {"model": self.model, "n": self.n, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        return cls(d["model"], int(d["n"]), dict(d.get("params", {})), int(d.get("seed", 0)))


def random_geometric(n: int, d: float, seed=None, labels=None) -> LabeledGraph:
    """Nodes are uniform points in the unit square, linked when closer than ``d``."""
    if not 0 < d < math.sqrt(2) + 1e-12:
        raise ValueError("radius must satisfy 0 < d < sqrt(2)")
    rng = make_rng(seed)
    pts = rng.random((n, 2))
    adj = np.zeros((n, n), dtype=np.uint8)
    if n > 1:
        adj = (squareform(pdist(pts)) < d).astype(np.uint8)
        np.fill_diagonal(adj, 0)
    return LabeledGraph(labels or default_labels(n), adj)


def erdos_renyi(n: int, p: float, seed=None, labels=None) -> LabeledGraph:
    if not 0 <= p <= 1:
        raise ValueError("edge probability must lie in [0, 1]")
    rng = make_rng(seed)
    upper = np.triu(rng.random((n, n)) < p, 1)
    adj = (upper | upper.T).astype(np.uint8)
    return LabeledGraph(labels or default_labels(n), adj)


def power_law_cutoffs(n: int, alpha: float) -> tuple[int, int]:
    """Lower and upper degree cut-offs ``(m, K)`` for a power law of exponent ``alpha``."""
    if alpha > 2:
        upper = int(math.floor(n ** (1.0 / (alpha - 1.0))))
    else:
        upper = n - 1
    return 1, max(1, min(upper, n - 1))


def power_law_pmf(n: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    m, k = power_law_cutoffs(n, alpha)
    support = np.arange(m, k + 1)
    w = support.astype(np.float64) ** (-alpha)
    return support, w / w.sum()


def sample_degrees(n: int, alpha: float, rng) -> np.ndarray:
    """IID power-law degrees; an odd total is fixed by redrawing one degree."""
    support, pmf = power_law_pmf(n, alpha)
    deg = rng.choice(support, size=n, p=pmf)
    while deg.sum() % 2:
        deg[rng.integers(n)] = rng.choice(support, p=pmf)
    return deg


@numba.njit(cache=True)
def _switch_repair(adj, eu, ev, n_edges, pu, pv, draws, tries):
    """Place pending stub pairs by degree-preserving switches.

    Pair ``q`` uses rows ``q * tries ...`` of ``draws``.  Returns the new
    edge count and the number of stubs dropped.
    """
    dropped = 0
    for q in range(pu.shape[0]):
        u, v = pu[q], pv[q]
        placed = False
        for t in range(q * tries, (q + 1) * tries):
            if n_edges == 0:
                break
            k = int(draws[t, 0] * n_edges)
            x, y = eu[k], ev[k]
            if draws[t, 1] < 0.5:
                x, y = y, x
            if u == x or v == y or adj[u, x] or adj[v, y] or (u == y and v == x):
                continue
            adj[x, y] = adj[y, x] = False
            adj[u, x] = adj[x, u] = True
            adj[v, y] = adj[y, v] = True
            eu[k], ev[k] = u, x
            eu[n_edges], ev[n_edges] = v, y
            n_edges += 1
            placed = True
            break
        if not placed:
            dropped += 2
    return n_edges, dropped


def _configuration_pairs(deg: np.ndarray, rng, tries: int = 50):
    """Pair stubs at random, then place each invalid pair by an edge switch.

    A pair ``(u, v)`` that would form a self-loop or a multi-edge is placed
    by removing a random accepted edge ``(x, y)`` and adding ``(u, x)`` and
    ``(v, y)``, which keeps every degree.  Pairs that find no valid switch
    within ``tries`` attempts are dropped.

    Returns the set of edges and the number of stubs left unpaired.
    """
    n = len(deg)
    stubs = np.repeat(np.arange(n), deg)
    rng.shuffle(stubs)
    adj = np.zeros((n, n), dtype=np.bool_)
    cap = len(stubs) // 2
    eu = np.empty(cap, dtype=np.int64)
    ev = np.empty(cap, dtype=np.int64)
    m = 0
    pending = []
    for a, b in zip(stubs[0::2].tolist(), stubs[1::2].tolist()):
        if a == b or adj[a, b]:
            pending.append((a, b))
        else:
            adj[a, b] = adj[b, a] = True
            eu[m], ev[m] = a, b
            m += 1
    pu = np.array([a for a, _ in pending], dtype=np.int64)
    pv = np.array([b for _, b in pending], dtype=np.int64)
    draws = rng.random((len(pending) * tries, 2))
    m, dropped = _switch_repair(adj, eu, ev, m, pu, pv, draws, tries)
    edges = {(int(a), int(b)) if a < b else (int(b), int(a)) for a, b in zip(eu[:m], ev[:m])}
    return edges, dropped


def _chung_lu_pairs(deg: np.ndarray, rng):
    w = deg.astype(np.float64)
    total = w.sum()
    prob = np.minimum(np.outer(w, w) / total, 1.0)
    upper = np.triu(rng.random(prob.shape) < prob, 1)
    iu, ju = np.nonzero(upper)
    return set(zip(iu.tolist(), ju.tolist())), 0


def scale_free(n: int, alpha: float, seed=None, labels=None, wiring: str = "configuration") -> LabeledGraph:
    """Graph with IID power-law degrees realised as a simple graph.

    ``wiring="configuration"`` pairs stubs and re-pairs self-loops and
    multi-edges by degree-preserving edge switches; stubs that still cannot
    be placed are dropped (logged).  For ``alpha < 2`` the degree sequence
    is usually not graphical, so some hub stubs are always lost.
    ``wiring="chung-lu"`` links ``i, j`` with probability
    ``min(d_i d_j / sum(d), 1)``.
    """
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if n < 10:
        raise ValueError("scale-free graphs need n >= 10")
    rng = make_rng(seed)
    deg = sample_degrees(n, alpha, rng)
    if wiring == "configuration":
        edges, dropped = _configuration_pairs(deg, rng)
    elif wiring == "chung-lu":
        edges, dropped = _chung_lu_pairs(deg, rng)
    else:
        raise ValueError(f"unknown wiring {wiring!r}")
    if dropped:
        log.debug("scale_free: %d stubs could not be paired and were dropped", dropped)
    adj = np.zeros((n, n), dtype=np.uint8)
    if edges:
        e = np.array(sorted(edges))
        adj[e[:, 0], e[:, 1]] = 1
        adj[e[:, 1], e[:, 0]] = 1
    return LabeledGraph(labels or default_labels(n), adj)


def shuffle_edges(g: LabeledGraph, gamma: float, seed=None, method: str = "reinsert") -> LabeledGraph:
    """Rewire a proportion ``gamma`` of the edges of ``g``.

    ``reinsert`` deletes ``ceil(gamma |E|)`` random edges and inserts as many
    edges uniformly among the non-edges of the depleted graph.  ``swap``
    performs ``ceil(gamma |E| / 2)`` degree-preserving double-edge swaps.
    """
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    rng = make_rng(seed)
    n = g.n
    iu, ju = np.triu_indices(n, 1)
    present = g.adjacency[iu, ju].astype(bool)
    n_edges = int(present.sum())
    k = int(math.ceil(round(gamma * n_edges, 9)))
    if k == 0:
        return g
    if method == "swap":
        return _swap_edges(g, int(math.ceil(k / 2)), rng)
    if method != "reinsert":
        raise ValueError(f"unknown rewiring method {method!r}")
    edge_idx = np.flatnonzero(present)
    drop = rng.choice(edge_idx, size=k, replace=False)
    present = present.copy()
    present[drop] = False
    free = np.flatnonzero(~present)
    if len(free) < k:
        raise ValueError("graph too dense to reinsert the rewired edges")
    add = rng.choice(free, size=k, replace=False)
    present[add] = True
    adj = np.zeros((n, n), dtype=np.uint8)
    adj[iu[present], ju[present]] = 1
    adj += adj.T
    return LabeledGraph(g.labels, adj)


def _swap_edges(g: LabeledGraph, n_swaps: int, rng, max_tries_factor: int = 100) -> LabeledGraph:
    adj = np.array(g.adjacency, copy=True)
    iu, ju = np.nonzero(np.triu(adj, 1))
    edges = np.stack([iu, ju], axis=1)
    if len(edges) < 2:
        return g
    done = tries = 0
    while done < n_swaps and tries < max_tries_factor * n_swaps:
        tries += 1
        e1, e2 = rng.choice(len(edges), size=2, replace=False)
        a, b = edges[e1]
        c, d = edges[e2]
        if rng.random() < 0.5:
            c, d = d, c
        if len({a, b, c, d}) < 4 or adj[a, d] or adj[c, b]:
            continue
        adj[a, b] = adj[b, a] = adj[c, d] = adj[d, c] = 0
        adj[a, d] = adj[d, a] = adj[c, b] = adj[b, c] = 1
        edges[e1] = (a, d)
        edges[e2] = (c, b)
        done += 1
    return LabeledGraph(g.labels, adj)


def plant_differential(spec: GeneratorSpec, gamma: float, subnet_size: int, seed=None,
                       rewire: str = "reinsert"):
    """Pair of graphs that differ by independent wiring on a hidden node set.

    ``gA`` is drawn from ``spec``, ``gB`` is ``gA`` with a proportion
    ``gamma`` of edges rewired.  Inside a random node set ``V*`` of size
    ``subnet_size`` all edges are replaced, in each graph, by an independent
    draw from the same model; edges between ``V*`` and the rest are kept.

    Returns
    -------
    ga, gb : LabeledGraph
    vstar : numpy.ndarray
        Sorted node indices of the planted set.
    """
    if not 0 < subnet_size <= spec.n:
        raise ValueError("subnet_size must lie in [1, n]")
    seed = spec.seed if seed is None else seed
    s_base, s_shuffle, s_pick, s_a, s_b = child_seeds(seed, 5)
    ga = spec.generate(seed=s_base)
    gb = shuffle_edges(ga, gamma, s_shuffle, method=rewire)
    vstar = np.sort(make_rng(s_pick).choice(spec.n, size=subnet_size, replace=False))
    block = np.ix_(vstar, vstar)
    out = []
    for g, s in ((ga, s_a), (gb, s_b)):
        adj = np.array(g.adjacency, copy=True)
        adj[block] = spec.generate(seed=s, n=subnet_size).adjacency
        out.append(LabeledGraph(g.labels, adj))
    return out[0], out[1], vstar
