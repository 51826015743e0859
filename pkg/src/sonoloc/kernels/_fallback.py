"""Pure-numpy implementations of the hot kernels.

Arithmetic is arranged expression-for-expression like the Cython core
(`_core.pyx`) so both backends return bit-identical results; keep the two
files in sync when touching either.
"""

import numpy as np

_CHUNK = 2048


def polygon_distance_batch(verts, pts):
    """Unsigned distance, closest boundary point and even-odd parity.

    verts: (n, 2) float64 polygon vertices, implicitly closed.
    pts:   (m, 2) float64 query points.
    Returns (dist (m,), closest (m, 2), inside (m,) uint8).
    """
    ax = verts[:, 0]
    ay = verts[:, 1]
    bx = np.roll(ax, -1)
    by = np.roll(ay, -1)
    ex = bx - ax
    ey = by - ay
    el2 = ex * ex + ey * ey
    safe = np.where(el2 > 0.0, el2, 1.0)

    m = pts.shape[0]
    dist = np.empty(m, dtype=np.float64)
    closest = np.empty((m, 2), dtype=np.float64)
    inside = np.empty(m, dtype=np.uint8)

    for lo in range(0, m, _CHUNK):
        hi = min(lo + _CHUNK, m)
        px = pts[lo:hi, 0:1]
        py = pts[lo:hi, 1:2]
        rx = px - ax
        ry = py - ay
        t = (rx * ex + ry * ey) / safe
        t = np.clip(t, 0.0, 1.0)
        t = np.where(el2 > 0.0, t, 0.0)
        dx = rx - t * ex
        dy = ry - t * ey
        d2 = dx * dx + dy * dy

        j = np.argmin(d2, axis=1)
        rows = np.arange(hi - lo)
        tj = t[rows, j]
        dist[lo:hi] = np.sqrt(d2[rows, j])
        closest[lo:hi, 0] = ax[j] + tj * ex[j]
        closest[lo:hi, 1] = ay[j] + tj * ey[j]

        cond = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (py - ay) * ex / ey
        crossings = cond & (px < xint)
        inside[lo:hi] = (crossings.sum(axis=1) & 1).astype(np.uint8)

    return dist, closest, inside


def polygon_contains_batch(verts, pts):
    """Even-odd containment test. Returns (m,) uint8."""
    ax = verts[:, 0]
    ay = verts[:, 1]
    bx = np.roll(ax, -1)
    by = np.roll(ay, -1)
    ex = bx - ax
    ey = by - ay

    m = pts.shape[0]
    inside = np.empty(m, dtype=np.uint8)
    for lo in range(0, m, _CHUNK):
        hi = min(lo + _CHUNK, m)
        px = pts[lo:hi, 0:1]
        py = pts[lo:hi, 1:2]
        cond = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (py - ay) * ex / ey
        crossings = cond & (px < xint)
        inside[lo:hi] = (crossings.sum(axis=1) & 1).astype(np.uint8)
    return inside


def label_8connected(mask):
    """BFS labeling of 8-connected components.

    Labels are assigned in raster order of each component's first pixel,
    starting at 1. Returns (labels (h, w) int32, count).
    """
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    count = 0
    neighbors = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
    for y0 in range(h):
        for x0 in range(w):
            if not mask[y0, x0] or labels[y0, x0]:
                continue
            count += 1
            stack = [(y0, x0)]
            labels[y0, x0] = count
            while stack:
                y, x = stack.pop()
                for dy, dx in neighbors:
                    ny = y + dy
                    nx = x + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not labels[ny, nx]:
                        labels[ny, nx] = count
                        stack.append((ny, nx))
    return labels, count
