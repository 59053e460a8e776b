"""Generalised Hamming Distance and its permutation test.

The permutation null relabels the nodes of the first network uniformly at
random.  Its first two moments are available in closed form (the Mantel
moments of a generalised correlation coefficient), so the standardised
statistic can be referred to a normal distribution without permuting.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from itertools import permutations

import numpy as np
from scipy.stats import norm

from .graph import (
    CenteredWeights,
    DegenerateInputError,
    LabeledGraph,
    WeightMatrix,
    center,
    check_aligned,
    weights,
)

DEFAULT_DIAG_THRESHOLD = 0.05
MAX_EXACT_N = 8


@dataclass(frozen=True)
class PermutationMoments:
    """Exact mean and variance of the GHD over all node relabellings.

    The intermediate sums are those of the centred weights; evaluating the
    moment formulas on centred weights gives the moments of the centred GHD
    and keeps the large cancelling terms (``A_a A_b``) at zero.
    """

    n: int
    mu: float
    sigma2: float
    s1a: float
    s2a: float
    ta: float
    s1b: float
    s2b: float
    tb: float

    @property
    def aa(self):
        return self.s1a ** 2

    @property
    def ba(self):
        return self.ta - self.s2a

    @property
    def ca(self):
        return self.aa + 2 * self.s2a - 4 * self.ta

    @property
    def ab(self):
        return self.s1b ** 2

    @property
    def bb(self):
        return self.tb - self.s2b

    @property
    def cb(self):
        return self.ab + 2 * self.s2b - 4 * self.tb

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)


def moments_from_sums(n, s1a, s2a, ta, s1b, s2b, tb) -> PermutationMoments:
    """Closed-form permutation mean and variance from weight-matrix sums.

    Parameters
    ----------
    n : int
        Number of nodes, at least 4.
    s1a, s2a : float
        Sum of weights and of squared weights over distinct ordered pairs.
    ta : float
        Sum over nodes of the squared row sums (diagonal excluded).
    s1b, s2b, tb : float
        The same quantities for the second network.
    """
    if n < 4:
        raise DegenerateInputError("permutation variance needs at least 4 nodes")
    m = n * (n - 1)
    mu = (s2a + s2b) / m - 2.0 * s1a * s1b / (m * m)
    aa, ab = s1a * s1a, s1b * s1b
    ba, bb = ta - s2a, tb - s2b
    ca, cb = aa + 2 * s2a - 4 * ta, ab + 2 * s2b - 4 * tb
    terms = (
        2.0 * s2a * s2b,
        4.0 * ba * bb / (n - 2),
        ca * cb / ((n - 2) * (n - 3)),
        -aa * ab / m,
    )
    factor = 4.0 / float(m) ** 3
    sigma2 = factor * math.fsum(terms)
    if sigma2 < 0:
        scale = factor * sum(abs(t) for t in terms)
        if sigma2 < -(1e-12 + 1e-12 * scale):
            raise ArithmeticError(f"negative permutation variance {sigma2:.3e}")
        sigma2 = 0.0
    return PermutationMoments(n, mu, sigma2, s1a, s2a, ta, s1b, s2b, tb)


def _sums(c: np.ndarray, rows: np.ndarray) -> tuple[float, float, float]:
    # diagonal of a centred matrix is zero, so full-matrix sums are distinct-pair sums
    return float(rows.sum()), float(np.einsum("ij,ij->", c, c)), float(rows @ rows)


def _as_centered(w) -> CenteredWeights:
    if isinstance(w, LabeledGraph):
        raise TypeError("expected weights, got a graph; use weights(g, scheme) first")
    return center(w)


def _check_sizes(ca: CenteredWeights, cb: CenteredWeights) -> int:
    if ca.n != cb.n:
        raise ValueError(f"weight matrices differ in size: {ca.n} vs {cb.n}")
    if ca.labels and cb.labels and ca.labels != cb.labels:
        raise ValueError("weight matrices are not aligned on the same node labels")
    return ca.n


def permutation_moments(wa, wb) -> PermutationMoments:
    ca, cb = _as_centered(wa), _as_centered(wb)
    n = _check_sizes(ca, cb)
    if n < 4:
        raise DegenerateInputError("permutation variance needs at least 4 nodes")
    return moments_from_sums(n, *_sums(ca.values, ca.row_sums), *_sums(cb.values, cb.row_sums))


def ghd(wa, wb) -> float:
    """GHD: mean squared difference of centred weights over distinct pairs."""
    ca, cb = _as_centered(wa), _as_centered(wb)
    n = _check_sizes(ca, cb)
    if n < 2:
        raise DegenerateInputError("GHD needs at least 2 nodes")
    d = ca.values - cb.values
    return float(np.einsum("ij,ij->", d, d)) / (n * (n - 1))


def ghd_correlation_form(wa, wb) -> float:
    """GHD written as a constant minus a generalised correlation term."""
    ca, cb = _as_centered(wa), _as_centered(wb)
    n = _check_sizes(ca, cb)
    m = n * (n - 1)
    const = (np.sum(ca.values ** 2) + np.sum(cb.values ** 2)) / m
    return float(const - 2.0 / m * np.sum(ca.values * cb.values))


def hamming_distance(ga: LabeledGraph, gb: LabeledGraph) -> int:
    """Number of edge discrepancies, ``tr[(A - B)^2] / 2``."""
    check_aligned(ga, gb)
    d = ga.adjacency.astype(np.int64) - gb.adjacency.astype(np.int64)
    return int(np.sum(d * d)) // 2


@dataclass(frozen=True)
class NormalityDiagnostic:
    """Finite-size value of the normality ratio for one network.

    ``ratio`` is ``[sum_i r_i^3]^2 / [sum_i r_i^2]^3`` over the centred row
    sums ``r_i``; it should shrink towards zero as the network grows.
    """

    ratio: float
    n: int
    defined: bool = True

    def exceeds(self, threshold=DEFAULT_DIAG_THRESHOLD) -> bool:
        return (not self.defined) or self.ratio > threshold


def normality_diagnostic(c) -> NormalityDiagnostic:
    c = _as_centered(c)
    r = np.asarray(c.row_sums, dtype=np.float64)
    n = r.shape[0]
    # row sums of a constant-degree graph are zero up to rounding
    if not np.any(np.abs(r) > 1e-9 * max(n - 1, 1)):
        return NormalityDiagnostic(float("nan"), n, defined=False)
    num = math.fsum(r ** 3) ** 2
    den = math.fsum(r ** 2) ** 3
    return NormalityDiagnostic(num / den, n)


@dataclass(frozen=True)
class TestResult:
    """Outcome of the closed-form GHD test.

    ``p_association`` is ``P(Z <= z)``: small values mean the networks are
    closer than expected under independence.  ``p_divergence`` is the upper
    tail.  When the permutation variance is zero the test is degenerate and
    ``defined`` is False unless the statistic sits exactly at the mean.
    """

    __test__ = False

    n: int
    scheme: str
    statistic: float
    moments: PermutationMoments
    z: float
    p_association: float
    p_divergence: float
    diag_a: NormalityDiagnostic
    diag_b: NormalityDiagnostic
    defined: bool = True

    @property
    def p_value(self) -> float:
        return self.p_association

    @property
    def mu(self):
        return self.moments.mu

    @property
    def sigma2(self):
        return self.moments.sigma2

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "scheme": self.scheme,
            "statistic": self.statistic,
            "mu": self.moments.mu,
            "sigma2": self.moments.sigma2,
            "z": self.z,
            "p_association": self.p_association,
            "p_divergence": self.p_divergence,
            "diag_a": self.diag_a.ratio,
            "diag_b": self.diag_b.ratio,
        }


def standardize(statistic: float, moments: PermutationMoments):
    """Return ``(z, p_association, p_divergence, defined)``."""
    if moments.sigma2 > 0:
        z = (statistic - moments.mu) / math.sqrt(moments.sigma2)
        return z, float(norm.cdf(z)), float(norm.sf(z)), True
    scale = max(abs(statistic), abs(moments.mu), 1e-300)
    if abs(statistic - moments.mu) <= 1e-9 * scale:
        # every relabelling gives the same value
        return 0.0, 1.0, 1.0, True
    return float("nan"), float("nan"), float("nan"), False


def ghd_test_weights(wa, wb, scheme: str | None = None) -> TestResult:
    """Closed-form GHD test on two precomputed weight matrices."""
    ca, cb = _as_centered(wa), _as_centered(wb)
    n = _check_sizes(ca, cb)
    if n < 4:
        raise DegenerateInputError("the GHD test needs at least 4 nodes")
    stat = ghd(ca, cb)
    mom = permutation_moments(ca, cb)
    z, p_lo, p_hi, ok = standardize(stat, mom)
    return TestResult(
        n=n,
        scheme=scheme or ca.scheme,
        statistic=stat,
        moments=mom,
        z=z,
        p_association=p_lo,
        p_divergence=p_hi,
        diag_a=normality_diagnostic(ca),
        diag_b=normality_diagnostic(cb),
        defined=ok,
    )


def ghd_test(ga: LabeledGraph, gb: LabeledGraph, scheme: str = "topological-overlap") -> TestResult:
    """Test independence of two node-aligned graphs with the GHD.

    Examples
    --------
    >>> from dghd.netgen import random_geometric
    >>> g = random_geometric(60, 0.3, seed=1)
    >>> ghd_test(g, g).p_association < 1e-6
    True
    """
    check_aligned(ga, gb)
    return ghd_test_weights(weights(ga, scheme), weights(gb, scheme), scheme)


@dataclass(frozen=True)
class MonteCarloResult:
    p_value: float
    stderr: float
    n_perm: int
    seed: int


def _cross_products(a: np.ndarray, b: np.ndarray, perms: np.ndarray) -> np.ndarray:
    out = np.empty(len(perms))
    for k, p in enumerate(perms):
        out[k] = np.einsum("ij,ij->", a[np.ix_(p, p)], b)
    return out


def _tie_tolerance(a: np.ndarray, b: np.ndarray) -> float:
    return 1e-10 * max(math.sqrt(float(np.sum(a * a)) * float(np.sum(b * b))), 1e-300)


def monte_carlo_pvalue(wa, wb, n_perm: int = 1000, seed: int = 0) -> MonteCarloResult:
    """Association-tail permutation p-value from random relabellings of ``wa``.

    Returns ``(1 + #{GHD_perm <= GHD_obs}) / (n_perm + 1)`` and its binomial
    standard error.
    """
    if n_perm < 100:
        raise ValueError("n_perm must be at least 100")
    ca, cb = _as_centered(wa), _as_centered(wb)
    n = _check_sizes(ca, cb)
    rng = np.random.default_rng(seed)
    perms = np.array([rng.permutation(n) for _ in range(n_perm)])
    # GHD_perm = const - 2/M * cross, so a smaller GHD means a larger cross product
    a, b = ca.values, cb.values
    obs = float(np.einsum("ij,ij->", a, b))
    cross = _cross_products(a, b, perms)
    hits = int(np.count_nonzero(cross >= obs - _tie_tolerance(a, b)))
    p = (1 + hits) / (n_perm + 1)
    se = math.sqrt(p * (1 - p) / (n_perm + 1))
    return MonteCarloResult(p, se, n_perm, seed)


def exact_permutation_distribution(wa, wb) -> np.ndarray:
    """All ``N!`` relabelled GHD values, computed directly from the definition.

    Only intended as a reference for small networks.
    """
    ca, cb = _as_centered(wa), _as_centered(wb)
    n = _check_sizes(ca, cb)
    if n > MAX_EXACT_N:
        raise ValueError(f"exhaustive enumeration refused for N={n} > {MAX_EXACT_N}")
    a, b = ca.values, cb.values
    perms = np.array(list(permutations(range(n))), dtype=np.intp)
    permuted = a[perms[:, :, None], perms[:, None, :]]
    diff = permuted - b[None]
    return (diff ** 2).sum(axis=(1, 2)) / (n * (n - 1))


def exact_pvalue(wa, wb) -> float:
    """Exact association-tail p-value ``P_perm(GHD <= GHD_obs)``."""
    ca, cb = _as_centered(wa), _as_centered(wb)
    dist = exact_permutation_distribution(ca, cb)
    obs = ghd(ca, cb)
    tol = 1e-10 * max(abs(obs), 1e-300)
    return float(np.mean(dist <= obs + tol))


def to_dict(obj) -> dict:
    return asdict(obj)
