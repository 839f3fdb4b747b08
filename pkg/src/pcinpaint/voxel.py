"""Coordinate normalisation and unit-voxel snapping with normal blending."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .cloud import PointCloud
from .errors import DegenerateInputError
from .graph import build_knn_graph

_KEY_OFFSET = 1 << 20
_KEY_BASE = 1 << 21


@dataclass(frozen=True)
class NormalizationRecord:
    """Maps original coordinates ``p`` to ``p / scale - shift``."""

    scale: float
    shift: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("normalisation scale must be positive")

    @classmethod
    def identity(cls):
        return cls(1.0, (0.0, 0.0, 0.0))

    def apply(self, points):
        return np.asarray(points, dtype=float) / self.scale - np.asarray(self.shift)

    def invert(self, points):
        return (np.asarray(points, dtype=float) + np.asarray(self.shift)) * self.scale

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(" ".join(repr(float(v)) for v in (self.scale, *self.shift)) + "\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            vals = [float(v) for v in fh.read().split()]
        if len(vals) != 4:
            raise ValueError(f"{path}: expected 'r s_x s_y s_z', got {len(vals)} numbers")
        return cls(vals[0], tuple(vals[1:]))


def normalize_coordinates(cloud: PointCloud, K: int = 1):
    """Scale so the mean K-NN edge length is 1, then move the minimum corner to the origin."""
    pos = cloud.positions
    if len(pos) <= K:
        raise ValueError(f"normalisation with K={K} needs more than {K} points")
    g = build_knn_graph(pos, K)
    lengths = np.linalg.norm(pos[g.edges[:, 0]] - pos[g.edges[:, 1]], axis=1)
    r = float(lengths.mean())
    if r <= 0:
        raise DegenerateInputError("all points coincide; cannot normalise coordinates")
    scaled = pos / r
    shift = scaled.min(axis=0)
    rec = NormalizationRecord(r, tuple(shift.tolist()))
    return PointCloud(scaled - shift, cloud.normals), rec


def cell_keys(cells):
    """Order-preserving int64 keys for integer cells (lexicographic x, y, z)."""
    c = np.asarray(cells, dtype=np.int64).reshape(-1, 3) + _KEY_OFFSET
    return (c[:, 0] * _KEY_BASE + c[:, 1]) * _KEY_BASE + c[:, 2]


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Occupied unit cells, each holding its centre and a unit normal."""

    cells: np.ndarray    # (n, 3) int64, unique, lexicographically sorted
    normals: np.ndarray  # (n, 3)
    record: NormalizationRecord = NormalizationRecord.identity()

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, 3)
        normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
        keys = cell_keys(cells)
        order = np.argsort(keys, kind="stable")
        if len(keys) > 1 and np.any(np.diff(keys[order]) == 0):
            raise ValueError("duplicate cells in voxel grid")
        cells, normals = cells[order], normals[order]
        cells.flags.writeable = False
        normals.flags.writeable = False
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "normals", normals)

    def __len__(self):
        return len(self.cells)

    @cached_property
    def keys(self):
        return cell_keys(self.cells)

    @property
    def positions(self):
        return self.cells + 0.5

    @property
    def extent(self):
        """Inclusive (lo, hi) cell corners of the occupied region."""
        return self.cells.min(axis=0), self.cells.max(axis=0)

    def index_of(self, cells):
        """Row of each cell in this grid, -1 where unoccupied."""
        q = cell_keys(cells)
        if len(self.keys) == 0:
            return np.full(len(q), -1)
        pos = np.minimum(np.searchsorted(self.keys, q), len(self.keys) - 1)
        return np.where(self.keys[pos] == q, pos, -1)

    def contains(self, cells):
        return self.index_of(cells) >= 0

    def updated(self, add_cells=None, add_normals=None, remove_cells=None):
        """New grid with ``remove_cells`` dropped and ``add_cells`` written (overwriting)."""
        keep = np.ones(len(self), dtype=bool)
        if remove_cells is not None and len(remove_cells):
            rows = self.index_of(remove_cells)
            keep[rows[rows >= 0]] = False
        cells, normals = self.cells[keep], self.normals[keep]
        if add_cells is not None and len(add_cells):
            add_cells = np.asarray(add_cells, dtype=np.int64).reshape(-1, 3)
            add_normals = np.asarray(add_normals, dtype=float).reshape(-1, 3)
            clash = np.isin(cell_keys(cells), cell_keys(add_cells))
            cells = np.concatenate([cells[~clash], add_cells])
            normals = np.concatenate([normals[~clash], add_normals])
        return VoxelGrid(cells, normals, self.record)

    @classmethod
    def from_cloud(cls, cloud: PointCloud, record=None):
        """Rebuild a grid from a cloud of voxel centres (e.g. a saved grid)."""
        if not cloud.has_normals:
            raise ValueError("voxel grid needs per-point normals")
        cells = np.floor(cloud.positions).astype(np.int64)
        return cls(cells, cloud.normals, record or NormalizationRecord.identity())


def blend_into_cells(points, normals, sigma=1.0):
    """Snap points to unit cells and blend their normals with Gaussian weights
    on the distance to the cell centre. Returns ``(cells, unit_normals)``."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    normals = np.asarray(normals, dtype=float).reshape(-1, 3)
    cells = np.floor(points).astype(np.int64)
    uniq, inv = np.unique(cells, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    mu = np.exp(-np.sum((points - (cells + 0.5)) ** 2, axis=1) / (2.0 * sigma ** 2))
    acc = np.zeros((len(uniq), 3))
    np.add.at(acc, inv, mu[:, None] * normals)
    wsum = np.bincount(inv, mu, minlength=len(uniq))
    h = acc / wsum[:, None]
    norm = np.linalg.norm(h, axis=1)
    bad = norm < 1e-12
    if bad.any():
        # opposing normals cancelled: fall back to the point nearest the centre
        best = np.full(len(uniq), -1)
        order = np.lexsort((-mu, inv))
        first = np.ones(len(order), dtype=bool)
        first[1:] = inv[order][1:] != inv[order][:-1]
        best[inv[order][first]] = order[first]
        h[bad] = normals[best[bad]]
        norm[bad] = np.linalg.norm(h[bad], axis=1)
    return uniq, h / norm[:, None]


def voxelize(cloud: PointCloud, sigma: float = 1.0, record=None) -> VoxelGrid:
    """Replace the points of every unit cell by the cell centre with a blended unit normal."""
    if not cloud.has_normals:
        raise ValueError("voxelize requires normals; estimate them first")
    if len(cloud) == 0:
        raise ValueError("cannot voxelize an empty cloud")
    cells, normals = blend_into_cells(cloud.positions, cloud.normals, sigma)
    return VoxelGrid(cells, normals, record or NormalizationRecord.identity())


def to_cloud(grid: VoxelGrid, denormalize: bool = False) -> PointCloud:
    if len(grid) == 0:
        raise ValueError("empty voxel grid")
    pos = grid.positions
    if denormalize:
        pos = grid.record.invert(pos)
    return PointCloud(pos, grid.normals)
