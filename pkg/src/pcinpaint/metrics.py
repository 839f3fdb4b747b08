"""Point-to-plane PSNR and normalized symmetric Hausdorff distance."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cloud import BoundingBox, PointCloud, estimate_normals


def _check(*clouds):
    for c in clouds:
        if len(c) == 0:
            raise ValueError("metrics need non-empty clouds")


def _directed_plane_error(A: PointCloud, B: PointCloud) -> float:
    _, j = cKDTree(B.positions).query(A.positions, k=1)
    d = np.einsum("ij,ij->i", A.positions - B.positions[j], B.normals[j])
    return float(np.mean(d * d))


def point_to_plane_error(A: PointCloud, B: PointCloud) -> float:
    """Larger of the two directed mean squared point-to-plane distances."""
    _check(A, B)
    A, B = estimate_normals(A), estimate_normals(B)
    return max(_directed_plane_error(A, B), _directed_plane_error(B, A))


def intrinsic_resolution(cloud: PointCloud) -> float:
    """Largest nearest-neighbour distance within ``cloud``."""
    if len(cloud) < 2:
        raise ValueError("intrinsic resolution needs at least two points")
    d, _ = cKDTree(cloud.positions).query(cloud.positions, k=2)
    return float(d[:, 1].max())


def gpsnr(A: PointCloud, B: PointCloud) -> float:
    """10 log10(p^2 / e) with ``B`` as reference; ``inf`` when e = 0."""
    _check(A, B)
    p = intrinsic_resolution(B)
    e = point_to_plane_error(A, B)
    if e == 0.0:
        return math.inf
    return 10.0 * math.log10(p * p / e)


def ohd(A: PointCloud, B: PointCloud) -> float:
    """max over a in A of the distance to the nearest b in B."""
    _check(A, B)
    d, _ = cKDTree(B.positions).query(A.positions, k=1)
    return float(d.max())


def _volume(A: PointCloud, B: PointCloud) -> float:
    box = BoundingBox.from_points(A.positions).union(BoundingBox.from_points(B.positions))
    ext = np.asarray(box.extents, dtype=float)
    if np.any(ext == 0):
        # flat clouds: zero extents fall back to the coarser intrinsic resolution
        ext = np.where(ext == 0, max(intrinsic_resolution(c) if len(c) > 1 else 0.0
                                     for c in (A, B)), ext)
    return float(np.prod(ext))


def nshd(A: PointCloud, B: PointCloud) -> float:
    _check(A, B)
    h = max(ohd(A, B), ohd(B, A))
    if h == 0.0:
        return 0.0
    V = _volume(A, B)
    if V <= 0:
        raise ValueError("bounding volume is zero")
    return h / V


@dataclass(frozen=True)
class MetricReport:
    gpsnr: float
    nshd: float
    ohd_ab: float
    ohd_ba: float
    peak: float
    volume: float

    def line(self):
        return (f"gpsnr={self.gpsnr:.6f} nshd={self.nshd:.9g} ohd_ab={self.ohd_ab:.9g} "
                f"ohd_ba={self.ohd_ba:.9g}")

    def as_dict(self):
        d = asdict(self)
        if math.isinf(self.gpsnr):
            d["gpsnr"] = "inf"
        return d


def evaluate(A: PointCloud, B: PointCloud) -> MetricReport:
    """All metrics of ``A`` against reference ``B``."""
    _check(A, B)
    p = intrinsic_resolution(B)
    fwd, bwd = ohd(A, B), ohd(B, A)
    V = _volume(A, B)
    h = max(fwd, bwd)
    return MetricReport(gpsnr(A, B), h / V if h else 0.0, fwd, bwd, p, V)
