"""Per-hole orchestration: target cubes, source search, registration and solve."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .cubes import extract_cubes, filter_and_mirror_candidates, make_cube, plan_targets
from .errors import DegenerateDCError, NoCandidateError, RegistrationError
from .holes import HoleRegion
from .matching import DescriptorCache, rank_sources
from .registration import (boundary_translation, register_source, simplified_icp_rotation,
                           translate_cube)
from .solver import solve_inpaint
from .voxel import VoxelGrid, blend_into_cells, cell_keys

MAX_SOURCE_TRIES = 25


@dataclass(frozen=True)
class HoleReport:
    hole_id: int
    source_anchor: tuple = None
    mirrored: bool = False
    delta: float = math.nan
    residual: float = math.nan
    filled_cells: int = 0
    status: str = "unfilled"
    rotation_error: float = 0.0   # max of |R^T R - I| and |det R - 1| over targets

    def line(self):
        if self.source_anchor is None:
            anchor = "-"
        else:
            anchor = ",".join(str(a) for a in self.source_anchor) + ("m" if self.mirrored else "")
        return (f"{self.hole_id} {anchor} {self.delta:.12g} {self.residual:.6g} "
                f"{self.filled_cells}")


@dataclass
class _TargetResult:
    source: object
    delta: float
    residual: float
    cells: np.ndarray
    normals: np.ndarray
    rotation_error: float


def _descriptor_k(config):
    return None if config.k_policy == "sqrt-m" else int(config.k_policy)


def _fill_target(target, candidates, config: PipelineConfig, cache, seed):
    ranked = rank_sources(target, candidates, _descriptor_k(config), config.dc_mode, cache,
                          config.descriptor_support)
    if not ranked:
        raise NoCandidateError(f"every candidate for {target.anchor} is degenerate")
    last = None
    for score, source in ranked[:MAX_SOURCE_TRIES]:
        try:
            t = boundary_translation(target, source)
            moved = translate_cube(source, t)
            xf = simplified_icp_rotation(target, moved, seed=seed, translation=t)
            registered = register_source(source, xf, target, config.sigma)
        except RegistrationError as exc:
            last = exc
            continue
        solved, res = solve_inpaint(target, registered, config.alpha, config.beta,
                                    config.knn_k(registered.m), config.prior_mode,
                                    config.preserve_known)
        cells, normals = blend_into_cells(solved.points, solved.normals, config.sigma)
        local = cells - np.asarray(target.anchor)
        hit = np.isin(cell_keys(local), cell_keys(target.missing))
        if not hit.any():
            last = RegistrationError(f"solved source {source.anchor} misses the hole")
            continue
        R = xf.rotation
        err = float(max(np.abs(R.T @ R - np.eye(3)).max(), abs(np.linalg.det(R) - 1.0)))
        return _TargetResult(source, score.delta, res, cells[hit], normals[hit], err)
    raise last or NoCandidateError(f"no usable source for {target.anchor}")


def inpaint_hole(grid: VoxelGrid, hole: HoleRegion, config: PipelineConfig = None,
                 cache: DescriptorCache = None):
    """Fill one hole; returns the updated grid and a :class:`HoleReport`."""
    config = config or PipelineConfig()
    cache = cache or DescriptorCache(_descriptor_k(config), config.threads)
    if not len(hole.cells) or not len(grid):
        return grid, HoleReport(hole.hole_id, status="empty")
    M = config.M
    cubes = extract_cubes(grid, M, config.stride, (hole,))
    plan = plan_targets([c.anchor for c in cubes], M, hole.cells, hole.centroid())
    first = None
    filled, residual, rot_err = 0, 0.0, 0.0
    failures = []
    for i, anchor in enumerate(plan):
        open_cells = hole.cells[~grid.contains(hole.cells)]
        target = make_cube(grid, anchor, M, open_cells)
        if not len(target.missing):
            continue
        if target.m < 3:
            failures.append("sparse-target")
            continue
        if i:
            cubes = extract_cubes(grid, M, config.stride, (hole,))
        try:
            candidates = filter_and_mirror_candidates(
                cubes, target, config.candidate_ratio, config.min_candidate_ratio)
            res = _fill_target(target, candidates, config, cache, config.seed + i)
        except (NoCandidateError, RegistrationError, DegenerateDCError) as exc:
            warnings.warn(f"hole {hole.hole_id}, target {anchor}: {exc}")
            failures.append(type(exc).__name__)
            continue
        grid = grid.updated(res.cells, res.normals)
        filled += len(res.cells)
        residual = max(residual, res.residual)
        rot_err = max(rot_err, res.rotation_error)
        if first is None:
            first = res
    if first is None:
        return grid, HoleReport(hole.hole_id, status="no-candidate" if failures else "unfilled")
    status = "filled" if not failures else "partial"
    return grid, HoleReport(hole.hole_id, first.source.anchor, first.source.mirrored,
                            first.delta, residual, filled, status, rot_err)


def inpaint_all(grid: VoxelGrid, holes, config: PipelineConfig = None):
    """Fill holes in ascending id order; earlier fills count as known for later holes."""
    config = config or PipelineConfig()
    cache = DescriptorCache(_descriptor_k(config), config.threads)
    reports = []
    for hole in sorted(holes, key=lambda h: h.hole_id):
        grid, rep = inpaint_hole(grid, hole, config, cache)
        reports.append(rep)
    return grid, reports


def write_report(reports, path):
    with open(path, "w") as fh:
        fh.write("# hole_id source_anchor delta residual filled_cells\n")
        for r in reports:
            fh.write(r.line() + "\n")
