# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror :mod:`pcinpaint._pykernels`."""
import numpy as np


def label_components_8(const unsigned char[:, ::1] free):
    """Label 8-connected ``free`` pixels by breadth-first flood fill.

    Pixels are scanned row-major; each unlabelled free pixel starts the next
    label (1, 2, ...). Non-free pixels get -1. Returns ``(labels, count)``.
    """
    cdef Py_ssize_t h = free.shape[0], w = free.shape[1]
    labels_arr = np.full((h, w), -1, dtype=np.int32)
    cdef int[:, ::1] labels = labels_arr
    queue_arr = np.empty(max(h * w, 1), dtype=np.intp)
    cdef Py_ssize_t[::1] queue = queue_arr
    cdef Py_ssize_t r, c, rr, cc, head, tail, flat
    cdef int dr, dc
    cdef int current = 0

    for r in range(h):
        for c in range(w):
            if free[r, c]:
                labels[r, c] = 0

    for r in range(h):
        for c in range(w):
            if labels[r, c] != 0:
                continue
            current += 1
            labels[r, c] = current
            head = 0
            tail = 0
            queue[tail] = r * w + c
            tail += 1
            while head < tail:
                flat = queue[head]
                head += 1
                rr = flat // w
                cc = flat - rr * w
                for dr in range(-1, 2):
                    if rr + dr < 0 or rr + dr >= h:
                        continue
                    for dc in range(-1, 2):
                        if cc + dc < 0 or cc + dc >= w:
                            continue
                        if labels[rr + dr, cc + dc] == 0:
                            labels[rr + dr, cc + dc] = current
                            queue[tail] = (rr + dr) * w + cc + dc
                            tail += 1
    return labels_arr, current


cdef Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t x) nogil:
    cdef Py_ssize_t root = x, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def count_seeded_components(Py_ssize_t n, const Py_ssize_t[::1] ei,
                            const Py_ssize_t[::1] ej,
                            const unsigned char[::1] member,
                            const unsigned char[::1] seed):
    """Count components of the subgraph induced by ``member`` vertices that
    contain at least one ``seed`` vertex (union-find)."""
    parent_arr = np.arange(n, dtype=np.intp)
    cdef Py_ssize_t[::1] parent = parent_arr
    hit_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] hit = hit_arr
    cdef Py_ssize_t e, a, b, v, count = 0
    with nogil:
        for e in range(ei.shape[0]):
            if member[ei[e]] and member[ej[e]]:
                a = _find(parent, ei[e])
                b = _find(parent, ej[e])
                if a != b:
                    if a < b:
                        parent[b] = a
                    else:
                        parent[a] = b
        for v in range(n):
            if member[v] and seed[v]:
                a = _find(parent, v)
                if not hit[a]:
                    hit[a] = 1
                    count += 1
    return count


def agtv_sum(const double[:, ::1] normals, const Py_ssize_t[::1] ei,
             const Py_ssize_t[::1] ej):
    """Sum of |<n_k, n_l>| over ordered pairs of each undirected edge."""
    cdef Py_ssize_t e, a, b
    cdef double total = 0.0, d
    with nogil:
        for e in range(ei.shape[0]):
            a = ei[e]
            b = ej[e]
            d = (normals[a, 0] * normals[b, 0] + normals[a, 1] * normals[b, 1]
                 + normals[a, 2] * normals[b, 2])
            total += 2.0 * (d if d >= 0 else -d)
    return total
