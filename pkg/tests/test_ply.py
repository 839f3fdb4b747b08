import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from pcinpaint.cloud import PointCloud
from pcinpaint.errors import PlyFormatError, PlyTruncatedError
from pcinpaint.ply import load_ply, save_ply


def _cloud(n=20, seed=0, normals=True):
    rng = np.random.default_rng(seed)
    pos = rng.normal(size=(n, 3))
    nrm = rng.normal(size=(n, 3))
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    return PointCloud(pos, nrm if normals else None)


@pytest.mark.parametrize("fmt", ["ascii", "binary-le"])
def test_round_trip(tmp_path, fmt):
    c = _cloud()
    save_ply(c, tmp_path / "a.ply", fmt)
    back = load_ply(tmp_path / "a.ply")
    tol = 1e-8 if fmt == "ascii" else 0.0
    assert np.allclose(back.positions, c.positions, atol=tol, rtol=tol)
    assert np.allclose(back.normals, c.normals, atol=1e-8)


def test_round_trip_without_normals(tmp_path):
    c = _cloud(normals=False)
    save_ply(c, tmp_path / "a.ply")
    assert not load_ply(tmp_path / "a.ply").has_normals


def test_save_load_save_is_byte_identical(tmp_path):
    c = _cloud(50, seed=4)
    save_ply(c, tmp_path / "a.ply")
    save_ply(load_ply(tmp_path / "a.ply"), tmp_path / "b.ply")
    assert (tmp_path / "a.ply").read_bytes() == (tmp_path / "b.ply").read_bytes()


def test_float32_values_written_as_float(tmp_path):
    c = PointCloud([[0.5, 1.5, 2.5]], [[0.0, 0.0, 1.0]])
    save_ply(c, tmp_path / "a.ply")
    assert b"property float x" in (tmp_path / "a.ply").read_bytes()


@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)),
              elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_binary_round_trip_is_exact(tmp_path_factory, pos):
    path = tmp_path_factory.mktemp("ply") / "p.ply"
    save_ply(PointCloud(pos), path)
    assert np.array_equal(load_ply(path).positions, pos)


def test_extra_properties_and_elements_are_skipped(tmp_path):
    text = """ply
format ascii 1.0
comment made by hand
element vertex 2
property float x
property uchar red
property float y
property float z
property list uchar int idx
element face 1
property list uchar int vertex_indices
end_header
1 255 2 3 2 7 8
4 0 5 6 0
3 0 1 1
"""
    (tmp_path / "a.ply").write_text(text)
    c = load_ply(tmp_path / "a.ply")
    assert c.positions.tolist() == [[1, 2, 3], [4, 5, 6]]
    assert not c.has_normals


def test_big_endian_binary(tmp_path):
    header = b"ply\nformat binary_big_endian 1.0\nelement vertex 2\nproperty double x\n" \
             b"property double y\nproperty double z\nend_header\n"
    body = np.array([[1, 2, 3], [4, 5, 6]], dtype=">f8").tobytes()
    (tmp_path / "a.ply").write_bytes(header + body)
    assert load_ply(tmp_path / "a.ply").positions.tolist() == [[1, 2, 3], [4, 5, 6]]


def test_truncated_binary(tmp_path):
    c = _cloud(10)
    save_ply(c, tmp_path / "a.ply")
    data = (tmp_path / "a.ply").read_bytes()
    (tmp_path / "b.ply").write_bytes(data[:-5])
    with pytest.raises(PlyTruncatedError):
        load_ply(tmp_path / "b.ply")


def test_truncated_ascii_reports_line(tmp_path):
    (tmp_path / "a.ply").write_text(
        "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n0 0 0\n1 1 1\n")
    with pytest.raises(PlyTruncatedError) as err:
        load_ply(tmp_path / "a.ply")
    assert err.value.line == 10


@pytest.mark.parametrize("header, line", [
    ("plx\n", 1),
    ("ply\nformat weird 1.0\n", 2),
    ("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n", 3),
    ("ply\nformat ascii 1.0\nelement vertex 1\nproperty blob x\n", 4),
])
def test_malformed_header_reports_line(tmp_path, header, line):
    (tmp_path / "a.ply").write_text(header)
    with pytest.raises(PlyFormatError) as err:
        load_ply(tmp_path / "a.ply")
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}:")


def test_save_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        save_ply(PointCloud(np.zeros((0, 3))), tmp_path / "a.ply")
