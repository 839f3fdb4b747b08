"""Closed-form graph-Laplacian regularized fill of a target cube."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .cubes import Cube
from .errors import ConfigError, SolverError
from .graph import build_knn_graph, laplacian
from .voxel import cell_keys

RESIDUAL_TOL = 1e-8
MAX_REFINE = 3


@dataclass(frozen=True, eq=False)
class InpaintProblem:
    """One node per occupied cell of the registered source cube.

    ``known`` marks nodes whose cell is occupied in the target; ``anchor``
    holds the target coordinate there and the source coordinate elsewhere.
    """

    source: np.ndarray     # (N, 3) registered source coordinates
    anchor: np.ndarray     # (N, 3) data term per node
    known: np.ndarray      # (N,) bool
    L: sp.csr_matrix
    alpha: float
    beta: float
    prior: str = "relative"

    @property
    def n(self):
        return len(self.source)

    def system(self):
        d = np.where(self.known, 1.0, self.alpha)
        A = (sp.diags(d) + self.beta * self.L).tocsc()
        b = d[:, None] * self.anchor
        if self.prior == "relative":
            b = b + self.beta * (self.L @ self.source)
        return A, b


def _graph_laplacian(points, K):
    n = len(points)
    if n < 2:
        return sp.csr_matrix((n, n))
    return laplacian(build_knn_graph(points, min(K, n - 1))).matrix


def build_inpaint_problem(target: Cube, registered: Cube, alpha=0.1, beta=10.0, K=None,
                          prior="relative") -> InpaintProblem:
    if not alpha > 0 or beta < 0:
        raise ConfigError("the inpainting system needs alpha > 0 and beta >= 0")
    if prior not in ("relative", "literal"):
        raise ConfigError(f"unknown prior {prior!r}")
    src = np.asarray(registered.points, dtype=float)
    n = len(src)
    K = K or max(int(round(np.sqrt(n))), 2)
    tkeys = cell_keys(target.cells)
    rkeys = cell_keys(registered.cells)
    known = np.isin(rkeys, tkeys)
    anchor = src.copy()
    if known.any():
        order = np.argsort(tkeys)
        pos = order[np.searchsorted(tkeys, rkeys[known], sorter=order)]
        anchor[known] = target.points[pos]
    return InpaintProblem(src, anchor, known, _graph_laplacian(src, K), float(alpha),
                          float(beta), prior)


def inpaint_objective(problem: InpaintProblem, c) -> float:
    c = np.asarray(c, dtype=float)
    r = c - problem.anchor
    w = np.where(problem.known, 1.0, problem.alpha)
    z = c - problem.source if problem.prior == "relative" else c
    return float(np.sum(w[:, None] * r * r) + problem.beta * np.sum(z * (problem.L @ z)))


def inpaint_gradient(problem: InpaintProblem, c):
    A, b = problem.system()
    return 2.0 * (A @ np.asarray(c, dtype=float) - b)


def solve_problem(problem: InpaintProblem):
    """Solve ``A c = b`` for the three channels with one factorization.

    Returns ``(c, relative_residual)``.
    """
    if problem.n == 0:
        return np.empty((0, 3)), 0.0
    A, b = problem.system()
    try:
        lu = splu(A)
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from None
    c = lu.solve(b)
    bnorm = np.maximum(np.linalg.norm(b, axis=0), np.finfo(float).tiny)
    for _ in range(MAX_REFINE + 1):
        r = b - A @ c
        rel = float(np.max(np.linalg.norm(r, axis=0) / bnorm))
        if rel <= RESIDUAL_TOL:
            return c, rel
        c = c + lu.solve(r)
    raise SolverError(f"residual {rel:.3e} above {RESIDUAL_TOL:g}", residual=rel)


def solve_inpaint(target: Cube, registered: Cube, alpha=0.1, beta=10.0, K=None,
                  prior="relative", preserve_known=False):
    """Solved cube on the registered node set, and the relative residual."""
    problem = build_inpaint_problem(target, registered, alpha, beta, K, prior)
    c, res = solve_problem(problem)
    if preserve_known:
        c[problem.known] = problem.anchor[problem.known]
    solved = Cube(registered.anchor, registered.M, registered.cells, c, registered.normals,
                  registered.missing, registered.mirrored)
    return solved, res
