"""Kernel backend selection.

The compiled extension is used when it imports cleanly; setting
``PCINPAINT_PURE_PYTHON=1`` forces the pure-Python fallback.
"""
import os

import numpy as np

from . import _pykernels

if os.environ.get("PCINPAINT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"


def label_components_8(free):
    """Flood-fill labels of 8-connected free pixels; returns (labels, count)."""
    return _impl.label_components_8(np.ascontiguousarray(free, dtype=np.uint8))


def count_seeded_components(n, ei, ej, member, seed):
    """Components of the member-induced subgraph holding a seed vertex."""
    return int(_impl.count_seeded_components(
        int(n),
        np.ascontiguousarray(ei, dtype=np.intp),
        np.ascontiguousarray(ej, dtype=np.intp),
        np.ascontiguousarray(member, dtype=np.uint8),
        np.ascontiguousarray(seed, dtype=np.uint8),
    ))


def agtv_sum(normals, ei, ej):
    """Sum of absolute normal inner products over both orientations of each edge."""
    return float(_impl.agtv_sum(
        np.ascontiguousarray(normals, dtype=np.float64),
        np.ascontiguousarray(ei, dtype=np.intp),
        np.ascontiguousarray(ej, dtype=np.intp),
    ))
