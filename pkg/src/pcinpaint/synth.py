"""Synthetic hole punching with a ground-truth record."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .voxel import VoxelGrid


@dataclass(frozen=True)
class HoleSynthesisSpec:
    """Sphere (``radius``) or axis-aligned box (``half_extents``) around ``center``.

    Cells whose centres lie strictly inside the shape are removed.
    """

    shape: str
    center: tuple
    radius: float = 0.0
    half_extents: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.shape not in ("sphere", "box"):
            raise ValueError(f"unknown hole shape {self.shape!r}")
        if len(self.center) != 3:
            raise ValueError("center needs three coordinates")

    def inside(self, points):
        rel = np.asarray(points, dtype=float) - np.asarray(self.center, dtype=float)
        if self.shape == "sphere":
            return np.einsum("ij,ij->i", rel, rel) < self.radius ** 2
        return np.all(np.abs(rel) < np.asarray(self.half_extents, dtype=float), axis=1)

    @classmethod
    def parse(cls, text):
        """``sphere:cx,cy,cz:r`` or ``box:cx,cy,cz:hx,hy,hz``."""
        try:
            shape, c, size = text.split(":")
            center = tuple(float(v) for v in c.split(","))
            vals = tuple(float(v) for v in size.split(","))
        except ValueError:
            raise ValueError(f"bad hole spec {text!r}") from None
        if shape == "sphere":
            if len(vals) != 1:
                raise ValueError("sphere spec takes one radius")
            return cls(shape, center, radius=vals[0])
        if len(vals) != 3:
            raise ValueError("box spec takes three half extents")
        return cls(shape, center, half_extents=vals)


def punch_hole(grid: VoxelGrid, spec: HoleSynthesisSpec):
    """Returns ``(punched grid, removed grid)``; the two partition the input."""
    mask = spec.inside(grid.positions)
    punched = VoxelGrid(grid.cells[~mask], grid.normals[~mask], grid.record)
    removed = VoxelGrid(grid.cells[mask], grid.normals[mask], grid.record)
    return punched, removed
