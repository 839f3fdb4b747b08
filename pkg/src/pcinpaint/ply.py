"""Minimal PLY reader/writer for vertex positions and normals.

Reads ASCII and binary (little or big endian) files, keeping ``x y z`` and,
when all three are present, ``nx ny nz``. Other vertex properties are skipped.
"""
from __future__ import annotations

import numpy as np

from .cloud import PointCloud
from .errors import PlyFormatError, PlyTruncatedError

_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}
_FORMATS = {"ascii": "ascii", "binary_little_endian": "<", "binary_big_endian": ">"}
_WRITE_FORMATS = {"ascii": "ascii", "binary-le": "<", "binary_little_endian": "<", "binary": "<"}


class _Element:
    def __init__(self, name, count, line):
        self.name = name
        self.count = count
        self.line = line
        self.props = []  # (name, dtype) or (name, (count_dtype, item_dtype))

    @property
    def has_list(self):
        return any(isinstance(t, tuple) for _, t in self.props)


def _parse_header(fh):
    first = fh.readline()
    if first.strip() != b"ply":
        raise PlyFormatError("missing 'ply' magic", line=1)
    fmt = None
    elements = []
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            raise PlyFormatError("header ends without 'end_header'", line=lineno)
        parts = raw.decode("ascii", errors="replace").split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        key = parts[0]
        if key == "end_header":
            break
        if key == "format":
            if len(parts) != 3 or parts[1] not in _FORMATS:
                raise PlyFormatError(f"unsupported format line {raw!r}", line=lineno)
            fmt = _FORMATS[parts[1]]
        elif key == "element":
            if len(parts) != 3 or not parts[2].isdigit():
                raise PlyFormatError(f"bad element line {raw!r}", line=lineno)
            elements.append(_Element(parts[1], int(parts[2]), lineno))
        elif key == "property":
            if not elements:
                raise PlyFormatError("property before any element", line=lineno)
            if len(parts) == 5 and parts[1] == "list":
                if parts[2] not in _TYPES or parts[3] not in _TYPES:
                    raise PlyFormatError(f"unknown list type in {raw!r}", line=lineno)
                elements[-1].props.append((parts[4], (_TYPES[parts[2]], _TYPES[parts[3]])))
            elif len(parts) == 3 and parts[1] in _TYPES:
                elements[-1].props.append((parts[2], _TYPES[parts[1]]))
            else:
                raise PlyFormatError(f"bad property line {raw!r}", line=lineno)
        else:
            raise PlyFormatError(f"unexpected header keyword {key!r}", line=lineno)
    if fmt is None:
        raise PlyFormatError("no format line in header", line=lineno)
    vertex = next((e for e in elements if e.name == "vertex"), None)
    if vertex is None:
        raise PlyFormatError("no vertex element in header", line=lineno)
    names = [p for p, _ in vertex.props]
    for axis in "xyz":
        if axis not in names:
            raise PlyFormatError(f"vertex element lacks property {axis!r}", line=vertex.line)
    return fmt, elements, lineno


def _columns(vertex):
    names = [p for p, _ in vertex.props]
    pos = [names.index(a) for a in "xyz"]
    nrm = [names.index(a) for a in ("nx", "ny", "nz")] if all(
        a in names for a in ("nx", "ny", "nz")) else None
    return pos, nrm


def _read_ascii(fh, elements, header_lines):
    lines = fh.read().decode("ascii", errors="replace").splitlines()
    cursor = 0
    for el in elements:
        if el.name != "vertex":
            cursor += el.count
            continue
        body = lines[cursor:cursor + el.count]
        if len(body) < el.count:
            raise PlyTruncatedError(
                f"expected {el.count} vertices, found {len(body)}",
                line=header_lines + cursor + len(body) + 1)
        pos_cols, nrm_cols = _columns(el)
        rows = np.empty((el.count, len(el.props)))
        for r, text in enumerate(body):
            tokens = text.split()
            values, t = [], 0
            for _, typ in el.props:
                if isinstance(typ, tuple):
                    cnt = int(tokens[t])
                    values.append(np.nan)
                    t += 1 + cnt
                else:
                    values.append(tokens[t] if t < len(tokens) else None)
                    t += 1
            if None in values or t != len(tokens):
                raise PlyFormatError(f"vertex row has {len(tokens)} values",
                                     line=header_lines + cursor + r + 1)
            try:
                rows[r] = [float(v) for v in values]
            except ValueError:
                raise PlyFormatError(f"non-numeric vertex value in {text!r}",
                                     line=header_lines + cursor + r + 1) from None
        return rows[:, pos_cols], (rows[:, nrm_cols] if nrm_cols else None)
    raise AssertionError("vertex element vanished")


def _read_binary(fh, elements, endian, header_lines):
    for el in elements:
        if el.has_list:
            if el.name == "vertex":
                raise PlyFormatError("list properties on binary vertices are not supported",
                                     line=el.line)
            raise PlyFormatError(f"cannot skip binary list element {el.name!r}", line=el.line)
        dtype = np.dtype([(name, endian + typ) for name, typ in el.props])
        buf = fh.read(dtype.itemsize * el.count)
        if len(buf) < dtype.itemsize * el.count:
            raise PlyTruncatedError(
                f"element {el.name!r} expects {el.count} records, "
                f"found {len(buf) // dtype.itemsize}", line=el.line)
        if el.name != "vertex":
            continue
        data = np.frombuffer(buf, dtype=dtype, count=el.count)
        pos = np.stack([data[a].astype(np.float64) for a in "xyz"], axis=1)
        nrm = None
        if all(a in dtype.names for a in ("nx", "ny", "nz")):
            nrm = np.stack([data[a].astype(np.float64) for a in ("nx", "ny", "nz")], axis=1)
        return pos, nrm
    raise AssertionError("vertex element vanished")


def load_ply(path) -> PointCloud:
    """Load vertex positions (and normals when declared) from a PLY file."""
    with open(path, "rb") as fh:
        fmt, elements, header_lines = _parse_header(fh)
        if fmt == "ascii":
            pos, nrm = _read_ascii(fh, elements, header_lines)
        else:
            pos, nrm = _read_binary(fh, elements, fmt, header_lines)
    if nrm is not None:
        norms = np.linalg.norm(nrm, axis=1)
        # leave near-unit rows untouched so save/load/save stays byte-stable
        off = np.abs(norms - 1.0) > 1e-6
        if off.any():
            nrm = nrm.copy()
            nrm[off & (norms > 0)] /= norms[off & (norms > 0), None]
            nrm[norms == 0] = (0.0, 0.0, 1.0)
    return PointCloud(pos, nrm)


def _needs_double(*arrays):
    for a in arrays:
        if a is not None and not np.array_equal(a.astype(np.float32).astype(np.float64), a):
            return True
    return False


def save_ply(cloud: PointCloud, path, format: str = "binary-le") -> None:
    """Write ``cloud`` as PLY.

    Coordinates are stored as ``float`` whenever that is lossless and as
    ``double`` otherwise, so binary files always round-trip exactly.
    """
    if len(cloud) == 0:
        raise ValueError("refusing to write an empty point cloud")
    if format not in _WRITE_FORMATS:
        raise ValueError(f"unknown PLY format {format!r}")
    mode = _WRITE_FORMATS[format]
    double = _needs_double(cloud.positions, cloud.normals)
    typ = "double" if double else "float"
    names = ["x", "y", "z"] + (["nx", "ny", "nz"] if cloud.has_normals else [])
    header = ["ply",
              "format ascii 1.0" if mode == "ascii" else "format binary_little_endian 1.0",
              f"element vertex {len(cloud)}"]
    header += [f"property {typ} {name}" for name in names]
    header.append("end_header")
    cols = [cloud.positions] + ([cloud.normals] if cloud.has_normals else [])
    table = np.concatenate(cols, axis=1)
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if mode == "ascii":
            for row in table:
                fh.write((" ".join(f"{v:.9g}" for v in row) + "\n").encode("ascii"))
        else:
            fh.write(table.astype("<f8" if double else "<f4").tobytes())

