"""Boundary translation, three-point quaternion rotation and re-voxelization."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .cubes import Cube
from .errors import RegistrationError
from .voxel import blend_into_cells, cell_keys

MIN_PAIRS = 3
MAX_DRAWS = 10
COLLINEAR_TOL = 1e-6

_NEIGHBOURS = np.array([d for d in itertools.product((-1, 0, 1), repeat=3) if any(d)],
                       dtype=np.int64)


def quaternion_to_rotation(e):
    e0, e1, e2, e3 = np.asarray(e, dtype=float) / np.linalg.norm(e)
    return np.array([
        [e0*e0 + e1*e1 - e2*e2 - e3*e3, 2*(e1*e2 - e0*e3), 2*(e1*e3 + e0*e2)],
        [2*(e1*e2 + e0*e3), e0*e0 + e2*e2 - e1*e1 - e3*e3, 2*(e2*e3 - e0*e1)],
        [2*(e1*e3 - e0*e2), 2*(e2*e3 + e0*e1), e0*e0 + e3*e3 - e1*e1 - e2*e2],
    ])


def horn_quaternion(u, v):
    """Unit quaternion of the rotation best mapping centred ``u`` onto centred ``v``.

    Top eigenvector of the symmetric 4x4 matrix built from the cross-covariance
    ``S = sum u_i v_i^T``; sign fixed so that ``e0 >= 0``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    u = u - u.mean(axis=0)
    v = v - v.mean(axis=0)
    S = u.T @ v
    (sxx, sxy, sxz), (syx, syy, syz), (szx, szy, szz) = S
    N = np.array([
        [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
        [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
        [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
        [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
    ])
    w, vecs = np.linalg.eigh(N)
    e = vecs[:, -1]
    e = e / np.linalg.norm(e)
    if e[0] < 0:
        e = -e
    return e


@dataclass(frozen=True)
class RegistrationTransform:
    translation: np.ndarray
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    @classmethod
    def from_quaternion(cls, translation, e):
        e = np.asarray(e, dtype=float)
        e = e / np.linalg.norm(e)
        return cls(np.asarray(translation, dtype=float), e, quaternion_to_rotation(e))

    def apply(self, points, center):
        """Translate, then rotate about ``center``: rows map as ``(p + t - c) R^T + c``."""
        c = np.asarray(center, dtype=float)
        return (np.asarray(points, dtype=float) + self.translation - c) @ self.rotation.T + c


def rotation_from_control_points(u, v, translation=(0.0, 0.0, 0.0)) -> RegistrationTransform:
    """Rotation taking control points ``u`` (source) onto ``v`` (target)."""
    return RegistrationTransform.from_quaternion(translation, horn_quaternion(u, v))


def boundary_cells(target: Cube):
    """Local indices of known target cells 26-adjacent to a missing cell."""
    if not len(target.missing) or not target.m:
        return np.empty((0, 3), dtype=np.int64)
    halo = (target.missing[:, None, :] + _NEIGHBOURS[None]).reshape(-1, 3)
    mask = np.isin(cell_keys(target.cells), cell_keys(halo))
    return target.cells[mask]


def boundary_translation(target: Cube, source: Cube):
    """Mean offset from source to target over the target's one-hop boundary.

    Each boundary cell pairs with the source point in the same local cell, or
    else the Euclidean-nearest source cell within Chebyshev distance 1 (lowest
    row on ties).
    """
    bnd = boundary_cells(target)
    if not source.m or not len(bnd):
        raise RegistrationError(f"no pairable boundary between {target.anchor} and {source.anchor}")
    t_rows = np.flatnonzero(np.isin(cell_keys(target.cells), cell_keys(bnd)))
    tree = cKDTree(source.cells)
    exact = {k: i for i, k in enumerate(cell_keys(source.cells).tolist())}
    diffs = []
    for r in t_rows:
        cell = target.cells[r]
        j = exact.get(int(cell_keys(cell[None])[0]))
        if j is None:
            near = tree.query_ball_point(cell, 1, p=np.inf)
            if not near:
                continue
            near = np.sort(np.asarray(near))
            d2 = np.sum((source.cells[near] - cell) ** 2, axis=1)
            j = int(near[np.argmin(d2)])
        diffs.append(target.points[r] - source.points[j])
    if len(diffs) < MIN_PAIRS:
        raise RegistrationError(
            f"only {len(diffs)} boundary pairs between {target.anchor} and {source.anchor}")
    return np.mean(diffs, axis=0)


def _collinear(p):
    area = np.linalg.norm(np.cross(p[1] - p[0], p[2] - p[0]))
    return area < COLLINEAR_TOL


def simplified_icp_rotation(target: Cube, translated_source: Cube, seed=0,
                            translation=(0.0, 0.0, 0.0)) -> RegistrationTransform:
    """Seeded three-point quaternion registration of an already translated source."""
    if target.m < 3 or translated_source.m < 3:
        raise RegistrationError("registration needs at least 3 points in each cube")
    rng = np.random.default_rng(seed)
    tree = cKDTree(translated_source.points)
    for _ in range(MAX_DRAWS):
        pick = np.sort(rng.choice(target.m, size=3, replace=False))
        v = target.points[pick]
        _, j = tree.query(v, k=1)
        u = translated_source.points[j]
        if not (_collinear(v) or _collinear(u)):
            return rotation_from_control_points(u, v, translation)
    warnings.warn(f"collinear control points for target {target.anchor}; using identity rotation")
    return RegistrationTransform(np.asarray(translation, dtype=float))


def translate_cube(cube: Cube, t) -> Cube:
    return Cube(cube.anchor, cube.M, cube.cells, cube.points + np.asarray(t), cube.normals,
                cube.missing, cube.mirrored)


def register_source(source: Cube, transform: RegistrationTransform, target: Cube,
                    sigma=1.0) -> Cube:
    """Move ``source`` into the target window and re-voxelize it there.

    Cells falling outside the window are dropped. The result carries the
    target's anchor and missing mask.
    """
    center = target.center
    pts = transform.apply(source.points, center)
    nrm = source.normals @ transform.rotation.T
    cells, normals = blend_into_cells(pts, nrm, sigma)
    a = np.asarray(target.anchor)
    local = cells - a
    keep = np.all((local >= 0) & (local < target.M), axis=1)
    local, normals = local[keep], normals[keep]
    if len(target.missing) and not np.isin(cell_keys(local), cell_keys(target.missing)).any():
        raise RegistrationError(f"source {source.anchor} leaves the missing region of "
                                f"{target.anchor} empty")
    return Cube(target.anchor, target.M, local, local + a + 0.5, normals, target.missing,
                source.mirrored)
