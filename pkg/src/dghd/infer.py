"""Correlation networks from a samples-by-features matrix.

Two features are linked when their soft-thresholded correlation

    omega_ij = |(1 + cor(g_i, g_j)) / 2| ** b

is strictly greater than ``tau``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import LabeledGraph

log = logging.getLogger(__name__)

DEFAULT_POWER = 12
DEFAULT_TAU = 0.2
DEFAULT_MAX_FEATURES = 5000
NA_TOKENS = frozenset({"", "na", "nan", "null", "none", "?"})
NA_POLICIES = ("error", "drop-feature")


class MatrixFormatError(ValueError):
    """Malformed data matrix file."""


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """Numeric samples-by-features matrix; features become network nodes."""

    samples: tuple
    features: tuple
    values: np.ndarray = field(repr=False)
    dropped: tuple = ()

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        object.__setattr__(self, "samples", tuple(str(s) for s in self.samples))
        object.__setattr__(self, "features", tuple(str(f) for f in self.features))
        if vals.shape != (len(self.samples), len(self.features)):
            raise ValueError(
                f"values shape {vals.shape} does not match {len(self.samples)} samples "
                f"x {len(self.features)} features")
        if len(self.samples) < 3:
            raise ValueError("at least 3 samples are needed to estimate correlations")
        dup = _first_duplicate(self.features)
        if dup is not None:
            raise ValueError(f"duplicate feature label {dup!r}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def n_features(self) -> int:
        return len(self.features)


def _first_duplicate(labels):
    seen = set()
    for x in labels:
        if x in seen:
            return x
        seen.add(x)
    return None


def soft_threshold(cor, b: float = DEFAULT_POWER):
    """``|(1 + cor) / 2| ** b``."""
    return np.abs((1.0 + np.asarray(cor, dtype=np.float64)) / 2.0) ** b


def correlation_matrix(values: np.ndarray, block: int = 1024) -> np.ndarray:
    """Pearson correlation between columns, computed in column blocks.

    Columns must have non-zero variance.
    """
    x = np.asarray(values, dtype=np.float64)
    z = x - x.mean(axis=0)
    z /= np.sqrt(np.einsum("ij,ij->j", z, z))
    f = z.shape[1]
    out = np.empty((f, f))
    for s in range(0, f, block):
        out[s:s + block] = z[:, s:s + block].T @ z
    np.clip(out, -1.0, 1.0, out=out)
    np.fill_diagonal(out, 1.0)
    return out


def _check_params(b, tau):
    if not b >= 1:
        raise ValueError("power exponent b must be at least 1")
    if not 0 < tau < 1:
        raise ValueError("threshold tau must lie in (0, 1)")


def constant_features(data: DataMatrix) -> list[str]:
    v = data.values
    spread = v.max(axis=0) - v.min(axis=0)
    return [data.features[j] for j in np.flatnonzero(spread == 0)]


def correlation_adjacency(data: DataMatrix, b: float = DEFAULT_POWER, tau: float = DEFAULT_TAU,
                          max_features: int = DEFAULT_MAX_FEATURES, return_omega: bool = False):
    """Network linking features whose soft-thresholded correlation exceeds ``tau``.

    Parameters
    ----------
    data : DataMatrix
    b : float
        Power exponent, at least 1.
    tau : float
        Edge threshold in (0, 1); ties ``omega == tau`` are not linked.
    max_features : int
        Safety cap on the number of features (the cost is quadratic).
    return_omega : bool
        Also return the ``omega`` matrix over the retained features.

    Returns
    -------
    LabeledGraph, or (LabeledGraph, numpy.ndarray)
        Zero-variance features are dropped with a warning and do not
        appear as nodes.
    """
    _check_params(b, tau)
    if data.n_features > max_features:
        raise ValueError(
            f"{data.n_features} features exceed the cap of {max_features}; raise max_features to override")
    const = set(constant_features(data))
    if const:
        log.warning("dropping %d zero-variance feature(s): %s", len(const), ", ".join(sorted(const)))
    keep = [j for j, f in enumerate(data.features) if f not in const]
    labels = [data.features[j] for j in keep]
    if len(keep) < 2:
        omega = np.ones((len(keep), len(keep)))
        g = LabeledGraph.empty(len(keep), labels)
        return (g, omega) if return_omega else g
    omega = soft_threshold(correlation_matrix(data.values[:, keep]), b)
    adj = (omega > tau).astype(np.uint8)
    np.fill_diagonal(adj, 0)
    # symmetric by construction up to rounding; enforce it exactly
    adj = np.maximum(np.triu(adj, 1), np.triu(adj, 1).T)
    g = LabeledGraph(labels, adj)
    return (g, omega) if return_omega else g


def write_omega(omega: np.ndarray, labels, path) -> None:
    """Upper-triangle ``omega`` values as a ``source, target, omega`` TSV."""
    iu, ju = np.triu_indices(len(labels), 1)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["source", "target", "omega"])
        for i, j in zip(iu, ju):
            w.writerow([labels[i], labels[j], repr(float(omega[i, j]))])


def _delimiter(path: Path, fmt: str | None) -> str:
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        return ","
    if fmt in ("tsv", "tab", "txt"):
        return "\t"
    raise MatrixFormatError(f"unknown matrix format {fmt!r}; use csv or tsv")


def load_matrix(path, fmt: str | None = None, na_policy: str = "error") -> DataMatrix:
    """Read a delimited matrix: header row of feature labels, first column of sample labels.

    Parameters
    ----------
    path : path-like
    fmt : {"csv", "tsv"}, optional
        Defaults to the file extension.
    na_policy : {"error", "drop-feature"}
        Missing cells either raise or remove their whole feature column.

    Raises
    ------
    MatrixFormatError
        With the offending line number for ragged rows, non-numeric or
        missing cells, and duplicate labels.
    """
    path = Path(path)
    if na_policy not in NA_POLICIES:
        raise ValueError(f"unknown NA policy {na_policy!r}; use one of {NA_POLICIES}")
    delim = _delimiter(path, fmt)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter=delim))
    rows = [(i, r) for i, r in enumerate(rows, 1) if any(c.strip() for c in r)]
    if not rows:
        raise MatrixFormatError(f"{path}: empty file")
    head_line, header = rows[0]
    features = [c.strip() for c in header[1:]]
    if not features:
        raise MatrixFormatError(f"{path}:{head_line}: header has no feature columns")
    dup = _first_duplicate(features)
    if dup is not None:
        raise MatrixFormatError(f"{path}:{head_line}: duplicate feature label {dup!r}")
    samples, values = [], []
    missing = np.zeros(len(features), dtype=bool)
    for lineno, row in rows[1:]:
        if len(row) != len(features) + 1:
            raise MatrixFormatError(
                f"{path}:{lineno}: expected {len(features) + 1} fields, got {len(row)}")
        name = row[0].strip()
        if name in samples:
            raise MatrixFormatError(f"{path}:{lineno}: duplicate sample label {name!r}")
        samples.append(name)
        vals = []
        for j, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell.lower() in NA_TOKENS:
                if na_policy == "error":
                    raise MatrixFormatError(
                        f"{path}:{lineno}: missing value for feature {features[j]!r}")
                missing[j] = True
                vals.append(math.nan)
                continue
            try:
                x = float(cell)
            except ValueError:
                raise MatrixFormatError(
                    f"{path}:{lineno}: non-numeric value {cell!r} for feature {features[j]!r}") from None
            if not math.isfinite(x):
                raise MatrixFormatError(f"{path}:{lineno}: non-finite value {cell!r}")
            vals.append(x)
        values.append(vals)
    arr = np.array(values, dtype=np.float64).reshape(len(samples), len(features))
    dropped = tuple(f for f, m in zip(features, missing) if m)
    if dropped:
        log.warning("dropped %d feature(s) with missing values", len(dropped))
        keep = ~missing
        arr = arr[:, keep]
        features = [f for f, k in zip(features, keep) if k]
    try:
        return DataMatrix(samples, features, arr, dropped)
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: {exc}") from None
