"""Depth-map projection, BFS hole labelling and lifting holes back to 3D."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .voxel import VoxelGrid, cell_keys

AXES = ("+x", "-x", "+y", "-y", "+z", "-z")
_DIM = {"x": 0, "y": 1, "z": 2}


def axis_dims(axis):
    """(projection dimension, (map row dim, map col dim)) for an axis id."""
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}")
    d = _DIM[axis[1]]
    return d, tuple(k for k in range(3) if k != d)


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Per-pixel nearest-to-viewer depth. ``labels`` is -1 where a depth exists."""

    axis: str
    origin: tuple        # cell coordinates of pixel (0, 0) along the map dims
    depth: np.ndarray    # (H, W) int64, valid where has_depth
    has_depth: np.ndarray
    labels: np.ndarray   # int32

    @property
    def shape(self):
        return self.depth.shape


@dataclass(frozen=True, eq=False)
class HoleRegion:
    hole_id: int
    axis: str
    pixels: np.ndarray   # (k, 2) absolute cell coordinates along the map dims
    d_min: int
    d_max: int
    cells: np.ndarray    # (c, 3) missing voxel cells

    @property
    def pixel_count(self):
        return len(self.pixels)

    def centroid(self):
        return self.cells.mean(axis=0) + 0.5


def principal_projection_axis(grid: VoxelGrid) -> str:
    """Signed axis closest to the dominant direction of the voxel normals.

    The dominant direction is the top eigenvector of the (uncentred) normal
    scatter matrix, oriented to agree with the mean normal.
    """
    if len(grid) < 3:
        raise ValueError("principal axis needs at least 3 occupied cells")
    n = grid.normals
    scatter = n.T @ n / len(n)
    evals, evecs = np.linalg.eigh(scatter)
    if evals[-1] <= 1e-12:
        warnings.warn("degenerate normal scatter; projecting along +z")
        return "+z"
    e = evecs[:, -1]
    mean_proj = float(n.mean(axis=0) @ e)
    mag = np.abs(e)
    dim = int(np.flatnonzero(mag >= mag.max() - 1e-12)[0])
    if abs(mean_proj) > 1e-9:
        e = e * np.sign(mean_proj)
        sign = "+" if e[dim] > 0 else "-"
    else:
        sign = "+"
    return sign + "xyz"[dim]


def project_depth_map(grid: VoxelGrid, axis: str) -> DepthMap:
    """Depth is the min cell coordinate along the axis for ``+``, the max for ``-``."""
    d, (a, b) = axis_dims(axis)
    lo, hi = grid.extent
    h, w = hi[a] - lo[a] + 1, hi[b] - lo[b] + 1
    r = grid.cells[:, a] - lo[a]
    c = grid.cells[:, b] - lo[b]
    if axis[0] == "+":
        depth = np.full((h, w), np.iinfo(np.int64).max)
        np.minimum.at(depth, (r, c), grid.cells[:, d])
    else:
        depth = np.full((h, w), np.iinfo(np.int64).min)
        np.maximum.at(depth, (r, c), grid.cells[:, d])
    has = np.zeros((h, w), dtype=bool)
    has[r, c] = True
    depth = np.where(has, depth, 0)
    labels = np.where(has, -1, 0).astype(np.int32)
    return DepthMap(axis, (int(lo[a]), int(lo[b])), depth, has, labels)


def label_holes_bfs(dmap: DepthMap) -> DepthMap:
    """Give each 8-connected group of depth-less pixels its own label 1, 2, ..."""
    labels, _ = kernels.label_components_8(~dmap.has_depth)
    return replace(dmap, labels=labels)


def filter_holes(dmap: DepthMap, min_pixels: int = 4) -> list:
    """Labels of components with at least ``min_pixels`` pixels that do not touch the map border."""
    lab = dmap.labels
    n = int(lab.max()) if lab.size else 0
    if n <= 0:
        return []
    counts = np.bincount(lab[lab > 0], minlength=n + 1)
    border = np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]])
    touching = np.zeros(n + 1, dtype=bool)
    touching[border[border > 0]] = True
    return [k for k in range(1, n + 1) if counts[k] >= min_pixels and not touching[k]]


def lift_to_3d(dmap: DepthMap, label: int, grid: VoxelGrid, hole_id=None) -> HoleRegion:
    """3D cells of a hole: its pixels times the depth range of the adjacent
    known pixels widened by one cell each way, minus occupied cells."""
    d, (a, b) = axis_dims(dmap.axis)
    mask = dmap.labels == label
    grown = mask.copy()
    h, w = mask.shape
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            src = mask[max(-dr, 0):h - max(dr, 0), max(-dc, 0):w - max(dc, 0)]
            grown[max(dr, 0):h - max(-dr, 0), max(dc, 0):w - max(-dc, 0)] |= src
    ring = grown & dmap.has_depth
    if not ring.any():
        raise RuntimeError(f"hole {label} has no adjacent known pixel")
    d_min = int(dmap.depth[ring].min()) - 1
    d_max = int(dmap.depth[ring].max()) + 1
    rows, cols = np.nonzero(mask)
    pixels = np.stack([rows + dmap.origin[0], cols + dmap.origin[1]], axis=1)
    depths = np.arange(d_min, d_max + 1)
    cells = np.empty((len(pixels) * len(depths), 3), dtype=np.int64)
    cells[:, a] = np.repeat(pixels[:, 0], len(depths))
    cells[:, b] = np.repeat(pixels[:, 1], len(depths))
    cells[:, d] = np.tile(depths, len(pixels))
    cells = cells[~grid.contains(cells)]
    return HoleRegion(label if hole_id is None else hole_id, dmap.axis, pixels,
                      d_min, d_max, cells)


def hole_from_cells(cells, axis, hole_id=1) -> HoleRegion:
    """Hole region for a known set of missing cells (e.g. a synthesised punch)."""
    cells = np.unique(np.asarray(cells, dtype=np.int64).reshape(-1, 3), axis=0)
    if len(cells) == 0:
        raise ValueError("a hole needs at least one cell")
    d, (a, b) = axis_dims(axis)
    pixels = np.unique(cells[:, [a, b]], axis=0)
    return HoleRegion(hole_id, axis, pixels, int(cells[:, d].min()), int(cells[:, d].max()), cells)


def detect_holes(grid: VoxelGrid, min_pixels: int = 4, all_axes: bool = False,
                 axis=None) -> list:
    """Detect holes along the principal axis (or all six axes).

    With ``all_axes`` a hole whose cells overlap one found along an earlier
    axis is dropped. Hole ids are renumbered 1, 2, ...
    """
    axes = AXES if all_axes else (axis or principal_projection_axis(grid),)
    holes, seen = [], np.empty(0, dtype=np.int64)
    for ax in axes:
        dmap = label_holes_bfs(project_depth_map(grid, ax))
        for lab in filter_holes(dmap, min_pixels):
            hole = lift_to_3d(dmap, lab, grid, hole_id=len(holes) + 1)
            keys = cell_keys(hole.cells)
            if len(seen) and np.isin(keys, seen).any():
                continue
            seen = np.concatenate([seen, keys])
            holes.append(hole)
    return holes


def write_manifest(holes, path):
    """One hole per line: ``id axis pixel_count d_min d_max`` then flattened cells."""
    with open(path, "w") as fh:
        fh.write("# id axis pixel_count d_min d_max cells(x y z ...)\n")
        for h in holes:
            cells = " ".join(str(v) for v in h.cells.ravel().tolist())
            fh.write(f"{h.hole_id} {h.axis} {h.pixel_count} {h.d_min} {h.d_max} {cells}\n")


def read_manifest(path) -> list:
    holes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                hid, axis = int(parts[0]), parts[1]
                count, d_min, d_max = int(parts[2]), int(parts[3]), int(parts[4])
                flat = np.array([int(v) for v in parts[5:]], dtype=np.int64)
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed hole line") from exc
            if len(flat) % 3 or axis not in AXES:
                raise ValueError(f"{path}:{lineno}: malformed hole line")
            cells = flat.reshape(-1, 3)
            _, (a, b) = axis_dims(axis)
            pixels = np.unique(cells[:, [a, b]], axis=0) if len(cells) else np.empty((0, 2), np.int64)
            if len(pixels) != count:
                raise ValueError(f"{path}:{lineno}: pixel count {count} does not match cells")
            holes.append(HoleRegion(hid, axis, pixels, d_min, d_max, cells))
    return holes
