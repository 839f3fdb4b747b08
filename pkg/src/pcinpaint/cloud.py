"""Point-cloud container, exact k-NN index and normal estimation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, minimum_spanning_tree
from scipy.spatial import cKDTree

UNIT_TOL = 1e-6


def _frozen(a):
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Positions with optional unit normals.

    ``degenerate_normals`` is set by :func:`estimate_normals` when some
    neighbourhood collapsed to a single location and received the default
    normal (0, 0, 1).
    """

    positions: np.ndarray
    normals: Optional[np.ndarray] = None
    degenerate_normals: bool = False

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64)
        if pos.size == 0:
            pos = pos.reshape(0, 3)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must have shape (n, 3), got {pos.shape}")
        object.__setattr__(self, "positions", _frozen(pos))
        if self.normals is not None:
            nrm = np.array(self.normals, dtype=np.float64).reshape(-1, 3)
            if len(nrm) != len(pos):
                raise ValueError(f"{len(nrm)} normals for {len(pos)} positions")
            if len(nrm) and np.abs(np.linalg.norm(nrm, axis=1) - 1.0).max() > UNIT_TOL:
                raise ValueError("normals must have unit length")
            object.__setattr__(self, "normals", _frozen(nrm))

    def __len__(self):
        return len(self.positions)

    @property
    def has_normals(self):
        return self.normals is not None

    def with_normals(self, normals, degenerate=False):
        return PointCloud(self.positions, normals, degenerate)

    def bounding_box(self) -> "BoundingBox":
        return BoundingBox.from_points(self.positions)


@dataclass(frozen=True)
class BoundingBox:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError("bounding box min corner exceeds max corner")

    @classmethod
    def from_points(cls, points):
        points = np.asarray(points, dtype=float)
        if len(points) == 0:
            raise ValueError("bounding box of an empty point set")
        return cls(tuple(points.min(axis=0).tolist()), tuple(points.max(axis=0).tolist()))

    @property
    def extents(self):
        return np.asarray(self.hi) - np.asarray(self.lo)

    def volume(self, min_extent=0.0):
        return float(np.prod(np.maximum(self.extents, min_extent)))

    def union(self, other):
        return BoundingBox(tuple(np.minimum(self.lo, other.lo).tolist()),
                           tuple(np.maximum(self.hi, other.hi).tolist()))


class SpatialIndex:
    """Exact nearest-neighbour index over a fixed point set.

    Neighbour lists are sorted by distance with ties broken by ascending point
    index, so every graph built on top of them is deterministic.
    """

    def __init__(self, points):
        self.points = _frozen(np.array(points, dtype=np.float64).reshape(-1, 3))
        self._tree = cKDTree(self.points)

    @property
    def n(self):
        return len(self.points)

    def _exact(self, q, k, exclude):
        n = self.n
        kq = min(n, k + 2)
        while True:
            d, i = self._tree.query(q, kq)
            d, i = np.atleast_1d(d), np.atleast_1d(i)
            keep = i != exclude
            d, i = d[keep], i[keep]
            order = np.lexsort((i, d))
            d, i = d[order], i[order]
            if len(d) < k:
                raise ValueError(f"k={k} exceeds the number of available neighbours")
            # unreturned points are at least as far as the farthest returned one
            if kq >= n or d[-1] > d[k - 1]:
                return i[:k], d[:k]
            kq = min(n, 2 * kq)

    def query(self, point, k, exclude=None):
        """k nearest indexed points to ``point``; ``exclude`` drops one index."""
        if k < 1:
            raise ValueError("k must be positive")
        if k > self.n:
            raise ValueError(f"k={k} exceeds point count {self.n}")
        return self._exact(np.asarray(point, dtype=float), k, -1 if exclude is None else exclude)

    def query_radius(self, point, r):
        idx = np.asarray(self._tree.query_ball_point(point, r), dtype=np.intp)
        d = np.linalg.norm(self.points[idx] - point, axis=1)
        order = np.lexsort((idx, d))
        return idx[order], d[order]

    def nearest(self, queries):
        """Nearest indexed point for each query row (no self exclusion)."""
        d, i = self._tree.query(np.asarray(queries, dtype=float).reshape(-1, 3), 1)
        return i, d

    def knn_all(self, k):
        """k nearest neighbours of every indexed point, excluding itself.

        Returns ``(indices, distances)`` of shape ``(n, k)``.
        """
        n = self.n
        if k < 1:
            raise ValueError("k must be positive")
        if k > n - 1:
            raise ValueError(f"k={k} requires more than {n} points")
        out_i = np.empty((n, k), dtype=np.intp)
        out_d = np.empty((n, k))
        todo = np.arange(n)
        kq = min(n, k + 2)
        while len(todo):
            d, idx = self._tree.query(self.points[todo], kq)
            d, idx = d.reshape(len(todo), kq), idx.reshape(len(todo), kq)
            d = np.where(idx == todo[:, None], np.inf, d)
            order = np.lexsort((idx, d), axis=1)
            d = np.take_along_axis(d, order, axis=1)
            idx = np.take_along_axis(idx, order, axis=1)
            if kq >= n:
                done = np.ones(len(todo), dtype=bool)
            else:
                # the farthest real candidate must lie strictly beyond the k-th,
                # otherwise unreturned points could tie with lower indices
                last = np.where(np.isinf(d[:, -1]), d[:, -2], d[:, -1])
                done = last > d[:, k - 1]
            out_i[todo[done]] = idx[done, :k]
            out_d[todo[done]] = d[done, :k]
            todo = todo[~done]
            kq = min(n, 2 * kq)
        return out_i, out_d


def knn_query(index: SpatialIndex, query, k: int):
    """k nearest neighbours of ``query`` as ``[(point index, distance), ...]``.

    When ``query`` coincides with an indexed point, the lowest such index is
    treated as the query point itself and left out.
    """
    query = np.asarray(query, dtype=float)
    hits = np.flatnonzero(np.all(index.points == query, axis=1))
    exclude = int(hits[0]) if len(hits) else None
    idx, dist = index.query(query, k, exclude=exclude)
    return [(int(i), float(d)) for i, d in zip(idx, dist)]


def _orient_root(normal, offset):
    s = float(normal @ offset)
    if abs(s) <= 1e-12 * max(np.linalg.norm(offset), 1.0):
        s = normal[np.argmax(np.abs(normal))]
    return normal if s >= 0 else -normal


def estimate_normals(cloud: PointCloud, k: int = 10) -> PointCloud:
    """Local-PCA normals, consistently oriented along a minimum spanning tree.

    A cloud that already carries normals is returned unchanged.
    """
    if cloud.has_normals:
        return cloud
    pts = cloud.positions
    n = len(pts)
    if n < k + 1:
        raise ValueError(f"normal estimation with k={k} needs at least {k + 1} points")
    nbr, _ = SpatialIndex(pts).knn_all(k)
    hood = pts[np.concatenate([np.arange(n)[:, None], nbr], axis=1)]
    centered = hood - hood.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / (k + 1)
    evals, evecs = np.linalg.eigh(cov)
    normals = evecs[:, :, 0].copy()
    scale = np.maximum(np.abs(pts).max(), 1.0)
    degenerate = evals[:, -1] <= (1e-12 * scale) ** 2
    normals[degenerate] = (0.0, 0.0, 1.0)
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} degenerate neighbourhoods got normal (0, 0, 1)")

    rows = np.repeat(np.arange(n), k)
    cols = nbr.ravel()
    w = 1.0 - np.abs(np.einsum("ij,ij->i", normals[rows], normals[cols])) + 1e-9
    graph = coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    graph = graph.maximum(graph.T)
    mst = minimum_spanning_tree(graph)
    mst = mst + mst.T
    ncomp, comp = connected_components(mst, directed=False)
    centroid = pts.mean(axis=0)
    dist = np.linalg.norm(pts - centroid, axis=1)
    for c in range(ncomp):
        members = np.flatnonzero(comp == c)
        root = members[np.argmax(dist[members])]
        normals[root] = _orient_root(normals[root], pts[root] - centroid)
        order, pred = breadth_first_order(mst, root, directed=False, return_predecessors=True)
        for v in order[1:]:
            if normals[v] @ normals[pred[v]] < 0:
                normals[v] = -normals[v]
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return PointCloud(pts, normals, bool(degenerate.any()))
