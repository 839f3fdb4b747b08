"""Overlapping cube extraction, target selection and candidate filtering."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NoCandidateError
from .voxel import VoxelGrid


@dataclass(frozen=True, eq=False)
class Cube:
    """An M^3 window of the grid.

    ``cells`` are local indices of occupied cells, ``points`` their global
    coordinates and ``missing`` the local indices of cells to be filled.
    """

    anchor: tuple
    M: int
    cells: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    missing: np.ndarray
    mirrored: bool = False

    @property
    def m(self):
        return len(self.cells)

    @property
    def center(self):
        return np.asarray(self.anchor, dtype=float) + self.M / 2.0

    @property
    def key(self):
        """Sort key: anchor, then original before mirrored."""
        return (*self.anchor, int(self.mirrored))

    def mirror(self) -> "Cube":
        """Reflect across the x-y plane through the cube centre."""
        flip = np.array([1, 1, -1])
        shift = np.array([0, 0, self.M - 1])
        pts = self.points * flip + np.array([0.0, 0.0, 2.0 * self.anchor[2] + self.M])
        return Cube(self.anchor, self.M, self.cells * flip + shift, pts,
                    self.normals * flip, self.missing * flip + shift, not self.mirrored)

    def global_missing(self):
        return self.missing + np.asarray(self.anchor)


def _axis_anchors(lo, hi, M, stride):
    span = hi - lo + 1
    if span <= M:
        return [int(lo)]
    anchors = list(range(int(lo), int(hi) - M + 2, stride))
    if anchors[-1] != hi - M + 1:
        anchors.append(int(hi - M + 1))
    return anchors


def cube_anchors(grid: VoxelGrid, M: int, stride: int, extra_cells=None):
    """Per-axis anchor lists covering the grid extent (widened by ``extra_cells``)."""
    lo, hi = grid.extent
    if extra_cells is not None and len(extra_cells):
        lo = np.minimum(lo, extra_cells.min(axis=0))
        hi = np.maximum(hi, extra_cells.max(axis=0))
    return [_axis_anchors(lo[d], hi[d], M, stride) for d in range(3)]


def _in_window(cells, anchor, M):
    rel = cells - np.asarray(anchor)
    return np.all((rel >= 0) & (rel < M), axis=1)


def make_cube(grid: VoxelGrid, anchor, M, missing_cells=None, rows=None) -> Cube:
    anchor = tuple(int(a) for a in anchor)
    if rows is None:
        rows = np.flatnonzero(_in_window(grid.cells, anchor, M))
    cells = grid.cells[rows]
    if missing_cells is not None and len(missing_cells):
        missing_cells = np.asarray(missing_cells, dtype=np.int64).reshape(-1, 3)
        miss = missing_cells[_in_window(missing_cells, anchor, M)]
        miss = miss[~grid.contains(miss)]
    else:
        miss = np.empty((0, 3), dtype=np.int64)
    a = np.asarray(anchor)
    return Cube(anchor, M, cells - a, cells + 0.5, grid.normals[rows], miss - a)


def extract_cubes(grid: VoxelGrid, M: int = 20, stride=None, holes=()) -> list:
    """Non-empty cubes on the stride lattice; the last anchor per axis is
    clamped so the cube ends at the extent of the grid and hole cells."""
    stride = stride or max(M // 4, 1)
    missing = (np.concatenate([h.cells for h in holes]) if len(holes)
               else np.empty((0, 3), dtype=np.int64))
    ax, ay, az = cube_anchors(grid, M, stride, missing)
    cells = grid.cells
    cubes = []
    for x in ax:
        in_x = (cells[:, 0] >= x) & (cells[:, 0] < x + M)
        for y in ay:
            rows_xy = np.flatnonzero(in_x & (cells[:, 1] >= y) & (cells[:, 1] < y + M))
            zs = cells[rows_xy, 2]
            for z in az:
                rows = rows_xy[(zs >= z) & (zs < z + M)]
                cube = make_cube(grid, (x, y, z), M, missing, rows)
                if cube.m or len(cube.missing):
                    cubes.append(cube)
    return cubes


def plan_targets(anchors, M, hole_cells, centroid):
    """Greedy cover of ``hole_cells`` by cube windows.

    The cube holding the largest share comes first (ties: centre nearest the
    hole centroid, then lowest anchor); the remaining cover cubes follow in
    ascending anchor order.
    """
    anchors = [tuple(a) for a in anchors]
    remaining = np.asarray(hole_cells, dtype=np.int64).reshape(-1, 3)
    inside = np.array([_in_window(remaining, a, M) for a in anchors]) if anchors else None
    chosen = []
    alive = np.ones(len(remaining), dtype=bool)
    while alive.any():
        share = (inside & alive).sum(axis=1)
        if share.max() == 0:
            raise RuntimeError("hole cell lies outside every cube")
        best = max(range(len(anchors)), key=lambda i: (
            share[i], -np.linalg.norm(np.asarray(anchors[i]) + M / 2.0 - centroid),
            tuple(-v for v in anchors[i])))
        chosen.append(anchors[best])
        alive &= ~inside[best]
    return chosen[:1] + sorted(chosen[1:])


def select_target_cubes(cubes, holes) -> list:
    """(target cube, hole) pairs covering every hole cell."""
    by_anchor = {c.anchor: c for c in cubes}
    if not cubes:
        if any(len(h.cells) for h in holes):
            raise RuntimeError("hole cell lies outside every cube")
        return []
    M = cubes[0].M
    out = []
    for hole in holes:
        if not len(hole.cells):
            continue
        plan = plan_targets(list(by_anchor), M, hole.cells, hole.centroid())
        out.extend((by_anchor[a], hole) for a in plan)
    return out


def _touches(cube: Cube, cells):
    return bool(len(cells)) and bool(_in_window(cells, cube.anchor, cube.M).any())


def filter_and_mirror_candidates(cubes, target: Cube, ratio=0.8, min_ratio=0.3) -> list:
    """Candidates at least ``ratio`` times the target's size, plus their mirror images.

    The ratio is relaxed in steps of 0.1 down to ``min_ratio`` when nothing qualifies.
    """
    target_missing = target.global_missing()
    pool = [c for c in cubes if c.anchor != target.anchor and not c.mirrored
            and not _touches(c, target_missing)]
    r = ratio
    while True:
        chosen = [c for c in pool if c.m >= r * target.m and c.m > 0]
        if chosen:
            break
        if r - 0.1 < min_ratio - 1e-9:
            raise NoCandidateError(f"no candidate cube for target at {target.anchor}")
        r = round(r - 0.1, 10)
        warnings.warn(f"relaxing candidate ratio to {r:.1f} for target {target.anchor}")
    chosen.sort(key=lambda c: c.anchor)
    out = []
    for c in chosen:
        out.append(c)
        out.append(c.mirror())
    return out
