"""Labelled undirected graphs and the edge weightings compared by the GHD.

All computation is index based; labels are carried along so that two graphs
can be aligned node by node before they are compared.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ADJACENCY = "adjacency"
TOPOLOGICAL_OVERLAP = "topological-overlap"
SCHEMES = (ADJACENCY, TOPOLOGICAL_OVERLAP)


class GraphError(ValueError):
    """Invalid graph construction or incompatible graphs."""


class DegenerateInputError(ValueError):
    """Input too small or too regular for the requested quantity."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabeledGraph:
    """Undirected simple graph over an ordered set of unique labels.

    Parameters
    ----------
    labels : sequence of str
        Node identifiers; position defines the node index.
    adjacency : array_like
        Symmetric binary ``(N, N)`` matrix with zero diagonal.
    """

    labels: tuple
    adjacency: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        adj = np.array(self.adjacency, dtype=np.uint8, copy=True)
        n = len(labels)
        if adj.shape != (n, n):
            raise GraphError(f"adjacency shape {adj.shape} does not match {n} labels")
        if len(set(labels)) != n:
            seen, dups = set(), []
            for lab in labels:
                if lab in seen:
                    dups.append(lab)
                seen.add(lab)
            raise GraphError(f"duplicate node labels: {sorted(set(dups))}")
        if np.any(adj > 1):
            raise GraphError("adjacency must be binary")
        if np.any(np.diagonal(adj)):
            raise GraphError("self-loops are not allowed")
        if not np.array_equal(adj, adj.T):
            raise GraphError("adjacency must be symmetric")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "adjacency", _frozen(adj))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1, dtype=np.int64)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise GraphError(f"unknown node label {label!r}") from None

    def edges(self) -> list[tuple[str, str]]:
        iu, ju = np.nonzero(np.triu(self.adjacency, 1))
        return [(self.labels[i], self.labels[j]) for i, j in zip(iu, ju)]

    def subgraph(self, nodes: Iterable[int]) -> "LabeledGraph":
        """Induced subgraph on the given node indices, in the given order."""
        idx = np.asarray(list(nodes), dtype=np.intp)
        return LabeledGraph(
            [self.labels[i] for i in idx], self.adjacency[np.ix_(idx, idx)]
        )

    def relabel(self, order: Sequence[int]) -> "LabeledGraph":
        """Graph whose node ``k`` is node ``order[k]`` of this graph."""
        return self.subgraph(order)

    def __eq__(self, other):
        if not isinstance(other, LabeledGraph):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(
            self.adjacency, other.adjacency
        )

    def __hash__(self):
        return hash((self.labels, self.adjacency.tobytes()))

    @classmethod
    def from_edges(cls, edges, labels=None) -> "LabeledGraph":
        """Build a graph from ``(u, v)`` label pairs.

        If ``labels`` is omitted the node set is the union of the endpoints,
        in order of first appearance.
        """
        edges = [(str(u), str(v)) for u, v in edges]
        if labels is None:
            seen = {}
            for u, v in edges:
                seen.setdefault(u, None)
                seen.setdefault(v, None)
            labels = list(seen)
        labels = [str(x) for x in labels]
        pos = {lab: k for k, lab in enumerate(labels)}
        if len(pos) != len(labels):
            raise GraphError("duplicate node labels")
        adj = np.zeros((len(labels), len(labels)), dtype=np.uint8)
        for u, v in edges:
            if u not in pos or v not in pos:
                missing = u if u not in pos else v
                raise GraphError(f"edge endpoint {missing!r} not in node set")
            if u == v:
                raise GraphError(f"self-loop on {u!r}")
            adj[pos[u], pos[v]] = adj[pos[v], pos[u]] = 1
        return cls(labels, adj)

    @classmethod
    def empty(cls, n: int, labels=None) -> "LabeledGraph":
        labels = default_labels(n) if labels is None else labels
        return cls(labels, np.zeros((n, n), dtype=np.uint8))


def default_labels(n: int) -> list[str]:
    return [str(i) for i in range(n)]


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Symmetric edge-weight matrix derived from one graph."""

    values: np.ndarray = field(repr=False)
    scheme: str = TOPOLOGICAL_OVERLAP
    labels: tuple = ()

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown weight scheme {self.scheme!r}; use one of {SCHEMES}")
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValueError("weight matrix must be square")
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class CenteredWeights:
    """Off-diagonal weights with their mean removed; diagonal set to zero.

    ``row_sums[i]`` is the sum of row ``i`` over ``j != i``.
    """

    values: np.ndarray = field(repr=False)
    row_sums: np.ndarray = field(repr=False)
    mean: float = 0.0
    scheme: str = TOPOLOGICAL_OVERLAP
    labels: tuple = ()

    @property
    def n(self) -> int:
        return self.values.shape[0]


def degree(g: LabeledGraph, i: int) -> int:
    if not 0 <= i < g.n:
        raise IndexError(f"node index {i} out of range for graph of size {g.n}")
    return int(g.adjacency[i].sum())


def topological_overlap_matrix(adj: np.ndarray) -> np.ndarray:
    """One-step topological overlap of a binary symmetric adjacency matrix.

    For ``i != j``::

        a_ij = (sum_{l != i,j} A_il A_lj + A_ij) / (min(d_i, d_j) + 1 - A_ij)

    and ``a_ii = 1``.
    """
    a = np.asarray(adj, dtype=np.float64)
    # integer-valued products are exact in float64 regardless of summation order
    common = a @ a
    deg = a.sum(axis=1)
    num = common + a
    den = np.minimum.outer(deg, deg) + 1.0 - a
    to = num / den
    np.fill_diagonal(to, 1.0)
    return to


def topological_overlap(g: LabeledGraph) -> WeightMatrix:
    return WeightMatrix(topological_overlap_matrix(g.adjacency), TOPOLOGICAL_OVERLAP, g.labels)


def adjacency_weights(g: LabeledGraph) -> WeightMatrix:
    return WeightMatrix(g.adjacency.astype(np.float64), ADJACENCY, g.labels)


def weights(g: LabeledGraph, scheme: str) -> WeightMatrix:
    if scheme == TOPOLOGICAL_OVERLAP:
        return topological_overlap(g)
    if scheme == ADJACENCY:
        return adjacency_weights(g)
    raise ValueError(f"unknown weight scheme {scheme!r}; use one of {SCHEMES}")


def center_values(values: np.ndarray) -> tuple[np.ndarray, float]:
    """Subtract the off-diagonal mean; returns the centred matrix and the mean."""
    w = np.array(values, dtype=np.float64, copy=True)
    n = w.shape[0]
    if n < 2:
        raise DegenerateInputError("centring needs at least 2 nodes")
    np.fill_diagonal(w, 0.0)
    mean = w.sum() / (n * (n - 1))
    w -= mean
    np.fill_diagonal(w, 0.0)
    return w, float(mean)


def center(W) -> CenteredWeights:
    """Mean-centre the off-diagonal entries of a weight matrix.

    Already-centred input is returned unchanged, so centring is idempotent.
    """
    if isinstance(W, CenteredWeights):
        return W
    if isinstance(W, WeightMatrix):
        vals, scheme, labels = W.values, W.scheme, W.labels
    else:
        vals, scheme, labels = np.asarray(W, dtype=np.float64), TOPOLOGICAL_OVERLAP, ()
    c, mean = center_values(vals)
    rows = c.sum(axis=1)
    return CenteredWeights(_frozen(c), _frozen(rows), mean, scheme, tuple(labels))


def remove_node(g: LabeledGraph, i: int) -> LabeledGraph:
    if g.n < 2:
        raise DegenerateInputError("cannot remove a node from a single-node graph")
    if not 0 <= i < g.n:
        raise IndexError(f"node index {i} out of range for graph of size {g.n}")
    keep = [k for k in range(g.n) if k != i]
    return g.subgraph(keep)


def check_aligned(ga: LabeledGraph, gb: LabeledGraph) -> None:
    """Raise unless both graphs share the same labels in the same order."""
    if ga.labels == gb.labels:
        return
    sa, sb = set(ga.labels), set(gb.labels)
    if sa != sb:
        diff = sorted(sa ^ sb)
        raise GraphError(f"node sets differ; symmetric difference: {diff}")
    raise GraphError("node sets match but label order differs; use align()")


def align(ga: LabeledGraph, gb: LabeledGraph) -> tuple[LabeledGraph, LabeledGraph]:
    """Reorder ``gb`` to the label order of ``ga``.

    Raises
    ------
    GraphError
        If the two node sets differ.
    """
    if ga.labels == gb.labels:
        return ga, gb
    sa, sb = set(ga.labels), set(gb.labels)
    if sa != sb:
        raise GraphError(f"node sets differ; symmetric difference: {sorted(sa ^ sb)}")
    pos = {lab: k for k, lab in enumerate(gb.labels)}
    return ga, gb.relabel([pos[lab] for lab in ga.labels])


# -- edge-list files --------------------------------------------------------

NODES_HEADER = "#nodes:"


def read_edgelist(path) -> LabeledGraph:
    """Read a whitespace-separated edge list.

    Lines starting with ``#`` are comments, except a ``#nodes: a,b,...``
    header which pins the full node set (and its order).
    """
    path = Path(path)
    labels = None
    edges = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith(NODES_HEADER):
                    body = line[len(NODES_HEADER):].strip()
                    labels = [x.strip() for x in body.split(",") if x.strip()]
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(f"{path}:{lineno}: expected two node labels, got {len(parts)}")
            edges.append((parts[0], parts[1]))
    try:
        return LabeledGraph.from_edges(edges, labels)
    except GraphError as exc:
        raise GraphError(f"{path}: {exc}") from None


def write_edgelist(g: LabeledGraph, path) -> None:
    path = Path(path)
    for lab in g.labels:
        if "," in lab or any(ch.isspace() for ch in lab):
            raise GraphError(f"label {lab!r} cannot be written to an edge list")
    lines = [NODES_HEADER + " " + ",".join(g.labels)]
    lines += [f"{u}\t{v}" for u, v in g.edges()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
