# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.

Must stay arithmetically identical to `_fallback.py`: same expressions in
the same order, so results are bit-for-bit equal across backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def polygon_distance_batch(double[:, ::1] verts, double[:, ::1] pts):
    cdef Py_ssize_t n = verts.shape[0]
    cdef Py_ssize_t m = pts.shape[0]
    dist_arr = np.empty(m, dtype=np.float64)
    closest_arr = np.empty((m, 2), dtype=np.float64)
    inside_arr = np.empty(m, dtype=np.uint8)
    cdef double[::1] dist = dist_arr
    cdef double[:, ::1] closest = closest_arr
    cdef unsigned char[::1] inside = inside_arr

    cdef Py_ssize_t i, j, jn, bj
    cdef double px, py, ax, ay, bx, by, ex, ey, el2
    cdef double rx, ry, t, dx, dy, d2, best, bt, xint
    cdef int parity

    for i in range(m):
        px = pts[i, 0]
        py = pts[i, 1]
        best = -1.0
        bj = 0
        bt = 0.0
        parity = 0
        for j in range(n):
            jn = j + 1
            if jn == n:
                jn = 0
            ax = verts[j, 0]
            ay = verts[j, 1]
            bx = verts[jn, 0]
            by = verts[jn, 1]
            ex = bx - ax
            ey = by - ay
            el2 = ex * ex + ey * ey
            rx = px - ax
            ry = py - ay
            if el2 > 0.0:
                t = (rx * ex + ry * ey) / el2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            else:
                t = 0.0
            dx = rx - t * ex
            dy = ry - t * ey
            d2 = dx * dx + dy * dy
            if best < 0.0 or d2 < best:
                best = d2
                bj = j
                bt = t
            if (ay > py) != (by > py):
                xint = ax + (py - ay) * ex / ey
                if px < xint:
                    parity ^= 1
        jn = bj + 1
        if jn == n:
            jn = 0
        ax = verts[bj, 0]
        ay = verts[bj, 1]
        ex = verts[jn, 0] - ax
        ey = verts[jn, 1] - ay
        dist[i] = sqrt(best)
        closest[i, 0] = ax + bt * ex
        closest[i, 1] = ay + bt * ey
        inside[i] = <unsigned char> parity

    return dist_arr, closest_arr, inside_arr


def polygon_contains_batch(double[:, ::1] verts, double[:, ::1] pts):
    cdef Py_ssize_t n = verts.shape[0]
    cdef Py_ssize_t m = pts.shape[0]
    inside_arr = np.empty(m, dtype=np.uint8)
    cdef unsigned char[::1] inside = inside_arr

    cdef Py_ssize_t i, j, jn
    cdef double px, py, ax, ay, bx, by, ex, ey, xint
    cdef int parity

    for i in range(m):
        px = pts[i, 0]
        py = pts[i, 1]
        parity = 0
        for j in range(n):
            jn = j + 1
            if jn == n:
                jn = 0
            ax = verts[j, 0]
            ay = verts[j, 1]
            bx = verts[jn, 0]
            by = verts[jn, 1]
            ex = bx - ax
            ey = by - ay
            if (ay > py) != (by > py):
                xint = ax + (py - ay) * ex / ey
                if px < xint:
                    parity ^= 1
        inside[i] = <unsigned char> parity
    return inside_arr


def label_8connected(unsigned char[:, ::1] mask):
    """Union-find labeling, relabeled to raster order of first pixels."""
    cdef Py_ssize_t h = mask.shape[0]
    cdef Py_ssize_t w = mask.shape[1]
    labels_arr = np.zeros((h, w), dtype=np.int32)
    cdef int[:, ::1] labels = labels_arr

    parent_arr = np.zeros(h * w // 2 + 2, dtype=np.int32)
    cdef int[::1] parent = parent_arr
    cdef int next_provisional = 0

    cdef Py_ssize_t y, x
    cdef int lab, neigh, root, r2
    cdef Py_ssize_t k

    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            lab = 0
            # already-scanned 8-neighbors: W, NW, N, NE
            if x > 0 and mask[y, x - 1]:
                lab = _find(parent, labels[y, x - 1])
            if y > 0:
                if x > 0 and mask[y - 1, x - 1]:
                    neigh = _find(parent, labels[y - 1, x - 1])
                    lab = _merge(parent, lab, neigh)
                if mask[y - 1, x]:
                    neigh = _find(parent, labels[y - 1, x])
                    lab = _merge(parent, lab, neigh)
                if x + 1 < w and mask[y - 1, x + 1]:
                    neigh = _find(parent, labels[y - 1, x + 1])
                    lab = _merge(parent, lab, neigh)
            if lab == 0:
                next_provisional += 1
                parent[next_provisional] = next_provisional
                lab = next_provisional
            labels[y, x] = lab

    # second pass: map roots to labels ordered by first raster occurrence
    remap_arr = np.zeros(next_provisional + 1, dtype=np.int32)
    cdef int[::1] remap = remap_arr
    cdef int count = 0
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            root = _find(parent, labels[y, x])
            if remap[root] == 0:
                count += 1
                remap[root] = count
            labels[y, x] = remap[root]

    return labels_arr, count


cdef inline int _find(int[::1] parent, int a):
    cdef int r = a
    cdef int nxt
    while parent[r] != r:
        r = parent[r]
    while parent[a] != r:
        nxt = parent[a]
        parent[a] = r
        a = nxt
    return r


cdef inline int _merge(int[::1] parent, int a, int b):
    if a == 0:
        return b
    if b == 0 or a == b:
        return a
    if a < b:
        parent[b] = a
        return a
    parent[a] = b
    return b
