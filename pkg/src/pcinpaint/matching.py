"""Cube descriptors (direct component, AGTV) and non-local source search."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .cubes import Cube
from .errors import DegenerateDCError, NoCandidateError
from .graph import build_knn_graph
from .voxel import cell_keys

DC_EPS = 1e-9


@dataclass(frozen=True)
class SimilarityScore:
    dc_term: float    # delta_D
    agtv_term: float  # delta_V
    delta: float


def direct_component(cube: Cube):
    """Sum of normals divided by its squared norm (so its length is 1/|sum|)."""
    if cube.m == 0:
        raise DegenerateDCError("empty cube has no direct component")
    s = cube.normals.sum(axis=0)
    norm = float(np.linalg.norm(s))
    if norm < DC_EPS:
        raise DegenerateDCError(f"normals of cube {cube.anchor} cancel out")
    return s / norm ** 2


def default_k(m):
    return max(int(round(math.sqrt(m))), 2)


def agtv(cube: Cube, K=None) -> float:
    """Absolute normal inner products summed over the unweighted K-NN graph,
    both edge orientations, divided by K(K-1)."""
    m = cube.m
    K = default_k(m) if K is None else int(K)
    if K < 2:
        raise ValueError("AGTV needs K >= 2")
    if m <= K:
        raise ValueError(f"AGTV needs more than K={K} points, cube has {m}")
    g = build_knn_graph(cube.points, K)
    return kernels.agtv_sum(cube.normals, g.edges[:, 0], g.edges[:, 1]) / (K * (K - 1))


@dataclass(frozen=True)
class Descriptor:
    dc: np.ndarray
    agtv: float


def describe(cube: Cube, K=None) -> Descriptor:
    return Descriptor(direct_component(cube), agtv(cube, K))


def _mirrored(desc: Descriptor) -> Descriptor:
    return Descriptor(desc.dc * np.array([1.0, 1.0, -1.0]), desc.agtv)


def score(dt: Descriptor, dc: Descriptor, mode="complement") -> SimilarityScore:
    if mode == "complement":
        a = dt.dc / np.linalg.norm(dt.dc)
        b = dc.dc / np.linalg.norm(dc.dc)
        d_term = max(1.0 - abs(float(a @ b)), 0.0)
    elif mode == "literal":
        d_term = abs(float(dt.dc @ dc.dc))
    else:
        raise ValueError(f"unknown DC mode {mode!r}")
    v_term = abs(dt.agtv - dc.agtv)
    return SimilarityScore(d_term, v_term, math.exp(-(d_term + v_term)))


def similarity(target: Cube, candidate: Cube, K=None, mode="complement") -> SimilarityScore:
    return score(describe(target, K), describe(candidate, K), mode)


class DescriptorCache:
    """Descriptors keyed by cube anchor and content; mirrored cubes reuse the original's AGTV."""

    def __init__(self, K=None, threads=1):
        self.K = K
        self.threads = threads
        self._store = {}

    @staticmethod
    def _content(cube):
        return (cube.anchor, cube.m, hash(cube.cells.tobytes()), hash(cube.normals.tobytes()))

    def _compute(self, cube):
        try:
            return describe(cube, self.K)
        except (DegenerateDCError, ValueError) as exc:
            return exc

    def get_many(self, cubes):
        originals = {}
        for c in cubes:
            base = c.mirror() if c.mirrored else c
            originals.setdefault(self._content(base), base)
        todo = [(k, c) for k, c in originals.items() if k not in self._store]
        if todo:
            workers = self.threads or None
            if workers == 1 or len(todo) < 8:
                results = [self._compute(c) for _, c in todo]
            else:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(self._compute, [c for _, c in todo]))
            for (k, _), r in zip(todo, results):
                self._store[k] = r
        out = []
        for c in cubes:
            base = c.mirror() if c.mirrored else c
            d = self._store[self._content(base)]
            if isinstance(d, Descriptor) and c.mirrored:
                d = _mirrored(d)
            out.append(d)
        return out


def restrict_to_known(cube: Cube, target: Cube) -> Cube:
    """``cube`` without the cells that are missing in ``target`` (same local frame)."""
    if not len(target.missing):
        return cube
    keep = ~np.isin(cell_keys(cube.cells), cell_keys(target.missing))
    return Cube(cube.anchor, cube.M, cube.cells[keep], cube.points[keep], cube.normals[keep],
                cube.missing[:0], cube.mirrored)


def rank_sources(target: Cube, candidates, K=None, mode="complement", cache=None,
                 support="target"):
    """Candidates ordered by decreasing similarity (ties: lowest anchor, original first).

    With ``support="target"`` candidate descriptors are computed on the
    target's known cells only; ``"full"`` uses every candidate cell.
    Returns ``[(SimilarityScore, Cube), ...]``; degenerate candidates are skipped.
    """
    if support not in ("target", "full"):
        raise ValueError(f"unknown descriptor support {support!r}")
    cache = cache or DescriptorCache(K)
    dt = describe(target, K)
    views = candidates if support == "full" else [restrict_to_known(c, target) for c in candidates]
    ranked = []
    for cand, desc in zip(candidates, cache.get_many(views)):
        if not isinstance(desc, Descriptor):
            warnings.warn(f"skipping candidate {cand.anchor}: {desc}")
            continue
        ranked.append((score(dt, desc, mode), cand))
    ranked.sort(key=lambda sc: (-sc[0].delta, sc[1].key))
    return ranked


def best_source(target: Cube, candidates, K=None, mode="complement", support="target") -> Cube:
    ranked = rank_sources(target, candidates, K, mode, support=support)
    if not ranked:
        raise NoCandidateError("every candidate cube is degenerate")
    return ranked[0][1]
