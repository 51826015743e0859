"""Shapes, distance queries, projections, plane fitting and rigid registration.

All coordinates are in millimeters. Operations are pure; constructed values
are immutable in practice and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateGeometryError, ProjectionIncompleteError, ValidationError

_DEGENERATE_RTOL = 1e-12


def as_point2(p) -> np.ndarray:
    a = np.asarray(p, dtype=np.float64).reshape(2)
    if not np.all(np.isfinite(a)):
        raise ValidationError("point has non-finite coordinates")
    return a


def as_point3(p) -> np.ndarray:
    a = np.asarray(p, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValidationError("point has non-finite coordinates")
    return a


class Shape2D:
    """Closed simple polygon, stored counterclockwise.

    The constructor checks finiteness, vertex count and nonzero area, and
    normalizes orientation to CCW. Simplicity (no self-intersection) is
    checked lazily because user-drawn margins may legitimately self-cross;
    operations that require a simple polygon call `require_simple()`.
    """

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValidationError("vertices must be an (n, 2) array")
        if v.shape[0] >= 2 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if v.shape[0] < 3:
            raise ValidationError("polygon needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise ValidationError("polygon has non-finite vertices")
        if _all_collinear(v):
            raise ValidationError("polygon is degenerate (collinear vertices)")
        area2 = _signed_area2(v)
        if area2 < 0.0:
            v = v[::-1]
        # area2 == 0 with non-collinear vertices means a self-crossing
        # outline (possible for freehand markings); orientation is moot then
        self.vertices = np.ascontiguousarray(v)
        self._simple: bool | None = None

    @property
    def area(self) -> float:
        return 0.5 * _signed_area2(self.vertices)

    @property
    def perimeter(self) -> float:
        d = np.diff(np.vstack([self.vertices, self.vertices[:1]]), axis=0)
        return float(np.sqrt((d * d).sum(axis=1)).sum())

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def is_simple(self) -> bool:
        if self._simple is None:
            self._simple = _polygon_is_simple(self.vertices)
        return self._simple

    def require_simple(self) -> "Shape2D":
        if not self.is_simple():
            raise ValidationError("polygon is self-intersecting")
        return self

    def __repr__(self):
        return f"Shape2D({len(self.vertices)} vertices, area={self.area:.1f} mm^2)"


def _signed_area2(v: np.ndarray) -> float:
    x = v[:, 0]
    y = v[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _all_collinear(v: np.ndarray) -> bool:
    d = v - v[0]
    ref = None
    for row in d[1:]:
        if row[0] != 0.0 or row[1] != 0.0:
            ref = row
            break
    if ref is None:
        return True
    return bool(np.all(d[:, 0] * ref[1] - d[:, 1] * ref[0] == 0.0))


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _polygon_is_simple(v: np.ndarray) -> bool:
    n = len(v)
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        if np.array_equal(a, b):
            return False
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            c, d = v[j], v[(j + 1) % n]
            if _segments_properly_intersect(a, b, c, d):
                return False
    return True


@dataclass(frozen=True)
class Seed:
    """Implanted marker: ground-truth point plus a capture radius."""

    position: np.ndarray
    radius_mm: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "position", as_point2(self.position))
        if not (self.radius_mm > 0):
            raise ValidationError("seed radius must be positive")


@dataclass(frozen=True)
class DistanceFeatures:
    """Inputs to the sonification mappings.

    d_margin_mm is signed (negative inside the shape, boundary counts as
    inside); d_seed_mm is the unsigned distance to the seed position.
    """

    d_margin_mm: float
    d_seed_mm: float
    inside: bool

    def __post_init__(self):
        if not (np.isfinite(self.d_margin_mm) and np.isfinite(self.d_seed_mm)):
            raise ValidationError("non-finite distance feature")
        if self.d_seed_mm < 0:
            raise ValidationError("d_seed_mm must be >= 0")
        if self.inside != (self.d_margin_mm <= 0.0):
            raise ValidationError("inside flag inconsistent with d_margin_mm")


def signed_distance(shape: Shape2D, p) -> float:
    """Signed distance to the margin polygon; negative inside (even-odd)."""
    d, _, inside = kernels.polygon_distance_batch(shape.vertices, as_point2(p))
    return float(-d[0] if inside[0] else d[0])


def signed_distance_batch(shape: Shape2D, points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    d, _, inside = kernels.polygon_distance_batch(shape.vertices, pts)
    return np.where(inside.astype(bool), -d, d)


def closest_point(shape: Shape2D, p) -> np.ndarray:
    """Closest point on the shape boundary to p."""
    _, c, _ = kernels.polygon_distance_batch(shape.vertices, as_point2(p))
    return c[0]


def compute_features(shape: Shape2D, seed: Seed, p) -> DistanceFeatures:
    """Distance features (margin + seed) at probe position p."""
    q = as_point2(p)
    d_margin = signed_distance(shape, q)
    d_seed = float(np.linalg.norm(q - seed.position))
    return DistanceFeatures(d_margin_mm=d_margin, d_seed_mm=d_seed, inside=d_margin <= 0.0)


@dataclass(frozen=True)
class Plane:
    """Best-fit plane with a deterministic in-plane basis."""

    centroid: np.ndarray
    normal: np.ndarray
    basis_u: np.ndarray
    basis_v: np.ndarray


def fit_plane(points) -> Plane:
    """Least-squares plane through a 3-D point cloud.

    The normal is the eigenvector of the point covariance with the smallest
    eigenvalue; its sign is fixed so normal.z >= 0 (ties broken toward +x,
    then +y) to make the output deterministic.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 3:
        raise DegenerateGeometryError("plane fit needs at least 3 points")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("non-finite input points")
    centroid = pts.mean(axis=0)
    q = pts - centroid
    cov = q.T @ q
    evals, evecs = np.linalg.eigh(cov)
    if not evals[1] > evals[2] * _DEGENERATE_RTOL:
        raise DegenerateGeometryError("points are collinear; plane is not unique")
    normal = evecs[:, 0]
    if normal[2] < 0 or (normal[2] == 0 and (normal[0] < 0 or (normal[0] == 0 and normal[1] < 0))):
        normal = -normal
    ref = np.array([1.0, 0.0, 0.0])
    if abs(normal @ ref) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    u = ref - (ref @ normal) * normal
    u = u / np.linalg.norm(u)
    v = np.cross(normal, u)
    return Plane(centroid=centroid, normal=normal, basis_u=u, basis_v=v)


def project_to_plane(points, plane: Plane) -> np.ndarray:
    """In-plane (u, v) coordinates of each point; (m, 2)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    q = pts - plane.centroid
    return np.column_stack([q @ plane.basis_u, q @ plane.basis_v])


def embed_from_plane(coords, plane: Plane) -> np.ndarray:
    """Inverse of project_to_plane for in-plane points; (m, 3)."""
    uv = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    return plane.centroid + np.outer(uv[:, 0], plane.basis_u) + np.outer(uv[:, 1], plane.basis_v)


@dataclass(frozen=True)
class SurfaceMesh:
    """Triangle mesh (vertices in mm, triangle vertex indices)."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise ValidationError("mesh has non-finite vertices")
        if len(t) == 0:
            raise ValidationError("mesh has no triangles")
        if t.min() < 0 or t.max() >= len(v):
            raise ValidationError("triangle index out of range")
        a = v[t[:, 1]] - v[t[:, 0]]
        b = v[t[:, 2]] - v[t[:, 0]]
        areas = 0.5 * np.linalg.norm(np.cross(a, b), axis=1)
        if np.any(areas <= 0.0):
            raise ValidationError("mesh contains degenerate triangles")
        object.__setattr__(self, "vertices", np.ascontiguousarray(v))
        object.__setattr__(self, "triangles", np.ascontiguousarray(t))


def _ray_mesh_first_hit(origin, direction, mesh: SurfaceMesh):
    """Nearest ray/triangle intersection (Moller-Trumbore); None on miss."""
    eps = 1e-12
    v0 = mesh.vertices[mesh.triangles[:, 0]]
    e1 = mesh.vertices[mesh.triangles[:, 1]] - v0
    e2 = mesh.vertices[mesh.triangles[:, 2]] - v0
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > eps
    inv = np.where(ok, det, 1.0)
    tvec = origin - v0
    u = np.einsum("ij,ij->i", tvec, pvec) / inv
    qvec = np.cross(tvec, e1)
    v = (qvec @ direction) / inv
    t = np.einsum("ij,ij->i", e2, qvec) / inv
    geom_eps = 1e-9
    hit = ok & (u >= -geom_eps) & (v >= -geom_eps) & (u + v <= 1.0 + geom_eps) & (t >= -geom_eps)
    if not np.any(hit):
        return None
    tmin = t[hit].min()
    return origin + max(tmin, 0.0) * direction


def project_tumor_to_surface(outline: Shape2D, surface: SurfaceMesh, direction, depth_mm: float = 0.0) -> np.ndarray:
    """Lift a planar outline onto a surface mesh along per-vertex rays.

    Each outline vertex (x, y) starts a ray at (x, y, depth_mm) along
    `direction`; the nearest hit is kept and vertex order is preserved.
    Raises ProjectionIncompleteError listing vertices whose ray misses.
    """
    d = as_point3(direction)
    norm = np.linalg.norm(d)
    if not np.isclose(norm, 1.0, atol=1e-6):
        raise ValidationError("direction must be a unit vector")
    d = d / norm
    out = np.empty((len(outline.vertices), 3), dtype=np.float64)
    missing = []
    for i, (x, y) in enumerate(outline.vertices):
        hit = _ray_mesh_first_hit(np.array([x, y, depth_mm]), d, surface)
        if hit is None:
            missing.append(i)
        else:
            out[i] = hit
    if missing:
        raise ProjectionIncompleteError(missing)
    return out


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid transform p -> rotation @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9:
            raise ValidationError("rotation is not orthonormal")
        if not np.isclose(np.linalg.det(r), 1.0, atol=1e-9):
            raise ValidationError("rotation determinant must be +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation


def rigid_register(src, dst) -> tuple[RigidTransform, float]:
    """Least-squares rigid alignment of corresponding 3-D point sets.

    SVD-based with reflection correction; returns the transform and the
    fiducial registration error (RMS residual in mm).
    """
    a = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if a.shape != b.shape:
        raise ValidationError("source and destination counts differ")
    if len(a) < 3:
        raise DegenerateGeometryError("registration needs at least 3 point pairs")
    ca = a.mean(axis=0)
    cb = b.mean(axis=0)
    h = (a - ca).T @ (b - cb)
    u, s, vt = np.linalg.svd(h)
    if not s[1] > s[0] * _DEGENERATE_RTOL:
        raise DegenerateGeometryError("degenerate (collinear) fiducial configuration")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = cb - r @ ca
    res = a @ r.T + t - b
    fre = float(np.sqrt((res * res).sum(axis=1).mean()))
    return RigidTransform(rotation=r, translation=t), fre


def load_obj(path) -> SurfaceMesh:
    """Read the v/f subset of Wavefront OBJ (triangles; polygons are fanned)."""
    verts: list[list[float]] = []
    tris: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0] not in ("v", "f"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise ValidationError(f"{path}:{lineno}: malformed vertex line")
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            else:
                idx = [int(tok.split("/")[0]) - 1 for tok in parts[1:]]
                if len(idx) < 3:
                    raise ValidationError(f"{path}:{lineno}: face needs 3+ indices")
                for k in range(1, len(idx) - 1):
                    tris.append([idx[0], idx[k], idx[k + 1]])
    return SurfaceMesh(vertices=np.array(verts), triangles=np.array(tris))


def save_obj(mesh: SurfaceMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {float(x)!r} {float(y)!r} {float(z)!r}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")
