"""Pure-Python versions of the compiled kernels in ``_ckernels.pyx``."""
from collections import deque

import numpy as np


def label_components_8(free):
    free = np.asarray(free, dtype=bool)
    h, w = free.shape
    labels = np.where(free, 0, -1).astype(np.int32)
    current = 0
    for r in range(h):
        for c in range(w):
            if labels[r, c] != 0:
                continue
            current += 1
            labels[r, c] = current
            queue = deque([(r, c)])
            while queue:
                rr, cc = queue.popleft()
                for nr in range(max(rr - 1, 0), min(rr + 2, h)):
                    for nc in range(max(cc - 1, 0), min(cc + 2, w)):
                        if labels[nr, nc] == 0:
                            labels[nr, nc] = current
                            queue.append((nr, nc))
    return labels, current


def count_seeded_components(n, ei, ej, member, seed):
    parent = list(range(n))

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    member = np.asarray(member, dtype=bool)
    for a, b in zip(np.asarray(ei).tolist(), np.asarray(ej).tolist()):
        if member[a] and member[b]:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = {find(v) for v in np.flatnonzero(member & np.asarray(seed, dtype=bool))}
    return len(roots)


def agtv_sum(normals, ei, ej):
    normals = np.asarray(normals, dtype=float)
    dots = np.einsum("ij,ij->i", normals[ei], normals[ej])
    return float(2.0 * np.abs(dots).sum())
