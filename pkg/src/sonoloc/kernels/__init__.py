"""Hot geometry/raster kernels: compiled core with a pure-numpy fallback.

The Cython extension (`_core`) and the numpy fallback (`_fallback`)
implement identical arithmetic, so results are bit-for-bit equal. The
backend is selected once at import; `BACKEND` reports which one is active.
"""

import numpy as np

try:
    from . import _core as _impl

    BACKEND = "compiled"
except ImportError:  # extension not built; numpy fallback is fully equivalent
    from . import _fallback as _impl

    BACKEND = "fallback"


def _as_verts(vertices) -> np.ndarray:
    v = np.ascontiguousarray(vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
        raise ValueError("vertices must be an (n>=3, 2) array")
    return v


def _as_points(points) -> np.ndarray:
    p = np.ascontiguousarray(points, dtype=np.float64)
    if p.ndim == 1:
        p = p.reshape(1, 2)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError("points must be an (m, 2) array")
    return p


def polygon_distance_batch(vertices, points):
    """Unsigned min distance to the polygon boundary, closest point on it,
    and even-odd containment parity, for a batch of query points.

    Returns (dist (m,) float64, closest (m, 2) float64, inside (m,) uint8).
    """
    return _impl.polygon_distance_batch(_as_verts(vertices), _as_points(points))


def polygon_contains_batch(vertices, points):
    """Even-odd containment parity for a batch of points; (m,) uint8."""
    return _impl.polygon_contains_batch(_as_verts(vertices), _as_points(points))


def label_8connected(mask):
    """Label 8-connected components of a boolean mask.

    Labels start at 1 in raster order of each component's first pixel.
    Returns (labels (h, w) int32, count).
    """
    m = np.ascontiguousarray(mask, dtype=np.uint8)
    if m.ndim != 2:
        raise ValueError("mask must be 2-D")
    return _impl.label_8connected(m)
