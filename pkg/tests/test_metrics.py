import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcinpaint.cloud import PointCloud
from pcinpaint.metrics import (evaluate, gpsnr, intrinsic_resolution, nshd, ohd,
                               point_to_plane_error)


def _unit(v):
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _random_cloud(rng, n):
    return PointCloud(rng.normal(size=(n, 3)), _unit(rng.normal(size=(n, 3))))


def brute_nn(A, B):
    out = []
    for a in A:
        d = [np.linalg.norm(a - b) for b in B]
        out.append(int(np.argmin(d)))
    return out


def brute_plane_error(A, B):
    def directed(X, Y):
        nn = brute_nn(X.positions, Y.positions)
        return np.mean([float((x - Y.positions[j]) @ Y.normals[j]) ** 2
                        for x, j in zip(X.positions, nn)])
    return max(directed(A, B), directed(B, A))


def brute_ohd(A, B):
    return max(min(np.linalg.norm(a - b) for b in B.positions) for a in A.positions)


def brute_resolution(B):
    P = B.positions
    return max(min(np.linalg.norm(P[i] - P[j]) for j in range(len(P)) if j != i)
               for i in range(len(P)))


def plane(h=0.0, n=10):
    xs, ys = np.meshgrid(np.arange(n, dtype=float), np.arange(n, dtype=float))
    pts = np.stack([xs.ravel(), ys.ravel(), np.full(xs.size, h)], axis=1)
    return PointCloud(pts, np.tile([0, 0, 1.0], (len(pts), 1)))


def test_identical_clouds():
    A = plane()
    assert point_to_plane_error(A, A) == 0.0
    assert gpsnr(A, A) == math.inf
    assert ohd(A, A) == 0.0 and nshd(A, A) == 0.0


def test_plane_offset_error():
    assert point_to_plane_error(plane(0.0), plane(0.3)) == pytest.approx(0.09)


def test_plane_offset_zero_db():
    # unit spacing gives p = 1; offset h = 1 gives e = 1
    assert gpsnr(plane(1.0), plane(0.0)) == pytest.approx(0.0, abs=1e-12)


def test_gpsnr_monotone_in_offset():
    vals = [gpsnr(plane(h), plane(0.0)) for h in (0.8, 0.4, 0.2, 0.1)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_ohd_hand_example():
    A = PointCloud([[0, 0, 0]])
    B = PointCloud([[3, 0, 0], [0, 4, 0]])
    assert ohd(A, B) == 3.0 and ohd(B, A) == 4.0


def test_single_point_reference_rejected():
    with pytest.raises(ValueError):
        gpsnr(plane(), PointCloud([[0, 0, 0]], [[0, 0, 1.0]]))


def test_empty_rejected():
    with pytest.raises(ValueError):
        ohd(PointCloud(np.zeros((0, 3))), plane())


def test_flat_volume_uses_resolution():
    A, B = plane(0.0, 5), plane(0.0, 5)
    B2 = PointCloud(B.positions + [0, 0, 0], B.normals)
    rep = evaluate(A, B2)
    assert rep.volume == pytest.approx(4 * 4 * 1.0)


@given(st.integers(0, 10_000))
def test_metrics_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    A = _random_cloud(rng, int(rng.integers(2, 60)))
    B = _random_cloud(rng, int(rng.integers(2, 60)))
    assert point_to_plane_error(A, B) == pytest.approx(brute_plane_error(A, B), rel=1e-9)
    assert ohd(A, B) == pytest.approx(brute_ohd(A, B), rel=1e-9)
    lo = np.minimum(A.positions.min(0), B.positions.min(0))
    hi = np.maximum(A.positions.max(0), B.positions.max(0))
    V = float(np.prod(hi - lo))
    assert nshd(A, B) == pytest.approx(max(brute_ohd(A, B), brute_ohd(B, A)) / V, rel=1e-9)
    p = brute_resolution(B)
    assert intrinsic_resolution(B) == pytest.approx(p, rel=1e-12)
    e = brute_plane_error(A, B)
    assert gpsnr(A, B) == pytest.approx(10 * math.log10(p * p / e), rel=1e-9)


def test_nshd_symmetric():
    rng = np.random.default_rng(1)
    A, B = _random_cloud(rng, 30), _random_cloud(rng, 40)
    assert nshd(A, B) == nshd(B, A)


def test_normals_estimated_when_missing():
    A = PointCloud(plane(0.0, 6).positions)
    B = PointCloud(plane(0.5, 6).positions)
    assert point_to_plane_error(A, B) == pytest.approx(0.25)


def test_report_fields():
    rep = evaluate(plane(0.2), plane(0.0))
    assert rep.peak == 1.0 and rep.ohd_ab == pytest.approx(0.2)
    d = rep.as_dict()
    assert set(d) == {"gpsnr", "nshd", "ohd_ab", "ohd_ba", "peak", "volume"}
    assert evaluate(plane(), plane()).as_dict()["gpsnr"] == "inf"
