"""k-NN graphs, combinatorial Laplacians and graph-frequency tools."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import kernels
from .cloud import SpatialIndex
from .errors import CapacityError

ZERO_TOL = 1e-10
MULTIPLICITY_RTOL = 1e-8
DENSE_EIG_CAP = 4096


@dataclass(frozen=True, eq=False)
class KnnGraph:
    """Undirected weighted graph stored as an upper-triangular edge list."""

    n: int
    edges: np.ndarray  # (E, 2), i < j, lexicographically sorted
    weights: np.ndarray  # (E,)

    @classmethod
    def from_edges(cls, n, edges, weights=None):
        edges = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
        weights = (np.ones(len(edges)) if weights is None
                   else np.asarray(weights, dtype=float).reshape(-1))
        if len(weights) != len(edges):
            raise ValueError("one weight per edge required")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        if len(edges) and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(weights < 0):
            raise ValueError("edge weights must be non-negative")
        lo, hi = edges.min(axis=1), edges.max(axis=1)
        order = np.lexsort((hi, lo))
        lo, hi, weights = lo[order], hi[order], weights[order]
        keep = np.ones(len(lo), dtype=bool)
        keep[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
        return cls(int(n), np.stack([lo[keep], hi[keep]], axis=1), weights[keep])

    @property
    def num_edges(self):
        return len(self.edges)

    def adjacency(self):
        i, j = self.edges[:, 0], self.edges[:, 1]
        w = sp.coo_matrix((np.concatenate([self.weights, self.weights]),
                           (np.concatenate([i, j]), np.concatenate([j, i]))),
                          shape=(self.n, self.n))
        return w.tocsr()

    def num_components(self):
        return connected_components(self.adjacency(), directed=False)[0]

    def cycle_rank(self):
        """Edges to delete before the graph becomes a forest."""
        return self.num_edges - self.n + self.num_components()

    def save_edge_list(self, path):
        with open(path, "w") as fh:
            for (i, j), w in zip(self.edges.tolist(), self.weights.tolist()):
                fh.write(f"{i} {j} {w!r}\n")

    @classmethod
    def load_edge_list(cls, path, n=None):
        rows = np.loadtxt(path, ndmin=2)
        edges = rows[:, :2].astype(np.intp)
        if n is None:
            n = int(edges.max()) + 1 if len(edges) else 0
        return cls.from_edges(n, edges, rows[:, 2])


def build_knn_graph(points, K, mode="unweighted", sigma=1.0) -> KnnGraph:
    """Symmetrised (union) K-NN graph.

    ``mode`` is ``"unweighted"`` (weight 1) or ``"gaussian"`` with weights
    exp(-d^2 / (2 sigma^2)).
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(points)
    if K < 1 or K >= n:
        raise ValueError(f"K={K} must satisfy 1 <= K < point count {n}")
    nbr, dist = SpatialIndex(points).knn_all(K)
    src = np.repeat(np.arange(n), K)
    dst = nbr.ravel()
    if mode == "unweighted":
        w = np.ones(len(src))
    elif mode == "gaussian":
        w = np.exp(-dist.ravel() ** 2 / (2.0 * sigma ** 2))
    else:
        raise ValueError(f"unknown weighting mode {mode!r}")
    return KnnGraph.from_edges(n, np.stack([src, dst], axis=1), w)


@dataclass(frozen=True, eq=False)
class Laplacian:
    matrix: sp.csr_matrix
    degree: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]


def laplacian(graph: KnnGraph) -> Laplacian:
    """Combinatorial Laplacian D - W."""
    w = graph.adjacency()
    deg = np.asarray(w.sum(axis=1)).ravel()
    return Laplacian((sp.diags(deg) - w).tocsr(), deg)


def _check_signal(n, z):
    z = np.asarray(z, dtype=float)
    if z.shape[0] != n or z.ndim > 2:
        raise ValueError(f"signal of shape {z.shape} does not match {n} vertices")
    return z


def smoothness_energy(L: Laplacian, z) -> float:
    """z^T L z, summed over channels for an (N, C) signal."""
    z = _check_signal(L.n, z)
    return max(float(np.sum(z * (L.matrix @ z))), 0.0)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns

    @property
    def n(self):
        return len(self.eigenvalues)


def spectral_decompose(L: Laplacian, cap: int = DENSE_EIG_CAP) -> SpectralDecomposition:
    """Full eigendecomposition, ascending, first non-zero entry of each vector positive."""
    if L.n > cap:
        raise CapacityError(
            f"{L.n} vertices exceed the dense eigendecomposition cap of {cap}; "
            "solve linear systems with the Laplacian instead of diagonalising it")
    evals, evecs = np.linalg.eigh(L.matrix.toarray())
    for c in range(evecs.shape[1]):
        nz = np.flatnonzero(np.abs(evecs[:, c]) > ZERO_TOL)
        if len(nz) and evecs[nz[0], c] < 0:
            evecs[:, c] = -evecs[:, c]
    return SpectralDecomposition(evals, evecs)


def gft(decomp: SpectralDecomposition, z):
    z = _check_signal(decomp.n, z)
    return decomp.eigenvectors.T @ z


def igft(decomp: SpectralDecomposition, eta):
    eta = _check_signal(decomp.n, eta)
    return decomp.eigenvectors @ eta


def isotropic_gtv(graph: KnnGraph, z) -> float:
    """Sum over vertices of the l2 norm of the weighted local gradient."""
    z = _check_signal(graph.n, z)
    z2 = z.reshape(graph.n, -1)
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    sq = np.sum((z2[i] - z2[j]) ** 2, axis=1) * graph.weights ** 2
    per_vertex = np.bincount(i, sq, minlength=graph.n) + np.bincount(j, sq, minlength=graph.n)
    return float(np.sqrt(per_vertex).sum())


def _signs(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > ZERO_TOL, 1, np.where(x < -ZERO_TOL, -1, 0))


def count_nodal_domains(graph: KnnGraph, x, kind: str = "strong") -> int:
    """Number of strong or weak nodal domains of ``x`` on ``graph``.

    Entries with magnitude below 1e-10 count as zero.
    """
    s = _signs(_check_signal(graph.n, x))
    ei, ej = graph.edges[:, 0], graph.edges[:, 1]
    pos, neg = s > 0, s < 0
    if kind == "strong":
        members = ((pos, pos), (neg, neg))
    elif kind == "weak":
        members = ((s >= 0, pos), (s <= 0, neg))
    else:
        raise ValueError(f"unknown nodal domain kind {kind!r}")
    return sum(kernels.count_seeded_components(graph.n, ei, ej, m, seed) for m, seed in members)


def multiplicity_groups(eigenvalues, rtol=MULTIPLICITY_RTOL):
    """For each eigenvalue, the 1-based index where its group starts and the group size."""
    ev = np.asarray(eigenvalues, dtype=float)
    start = np.empty(len(ev), dtype=int)
    g = 0
    for i in range(len(ev)):
        if i and ev[i] - ev[i - 1] > rtol * max(1.0, abs(ev[i])):
            g = i
        start[i] = g
    size = np.bincount(start, minlength=len(ev))[start]
    return start + 1, size


@dataclass(frozen=True, eq=False)
class NodalDomainReport:
    index: np.ndarray          # 1-based position i of each eigenvector
    group_start: np.ndarray    # 1-based index of the first eigenvalue equal to lambda_i
    multiplicity: np.ndarray   # u
    strong: np.ndarray
    weak: np.ndarray
    zeros: np.ndarray          # z
    cycle_rank: int            # q
    strong_upper_ok: np.ndarray
    weak_upper_ok: np.ndarray
    strong_lower_ok: np.ndarray

    @property
    def violations(self):
        bad = ~(self.strong_upper_ok & self.weak_upper_ok & self.strong_lower_ok)
        return np.flatnonzero(bad) + 1

    @property
    def all_hold(self):
        return len(self.violations) == 0


def verify_nodal_bounds(decomp: SpectralDecomposition, graph: KnnGraph) -> NodalDomainReport:
    """Check the nodal-domain counts of every eigenvector against the
    multiplicity-aware upper bounds and the cycle-rank lower bound.

    The index entering the bounds is the first index of the eigenvalue's
    multiplicity group, which is where the underlying theorems place it.
    """
    n = decomp.n
    first, u = multiplicity_groups(decomp.eigenvalues)
    strong = np.empty(n, dtype=int)
    weak = np.empty(n, dtype=int)
    zeros = np.empty(n, dtype=int)
    for c in range(n):
        x = decomp.eigenvectors[:, c]
        strong[c] = count_nodal_domains(graph, x, "strong")
        weak[c] = count_nodal_domains(graph, x, "weak")
        zeros[c] = int(np.sum(np.abs(x) <= ZERO_TOL))
    q = graph.cycle_rank()
    return NodalDomainReport(
        index=np.arange(1, n + 1), group_start=first, multiplicity=u,
        strong=strong, weak=weak, zeros=zeros, cycle_rank=q,
        strong_upper_ok=strong <= first + u - 1,
        weak_upper_ok=weak <= first,
        strong_lower_ok=strong >= first + u - 1 - q - zeros,
    )
