"""Geometry operations against brute-force and construct-and-recover oracles."""

import numpy as np
import pytest

from sonoloc.errors import DegenerateGeometryError, ProjectionIncompleteError, ValidationError
from sonoloc.geometry import (
    DistanceFeatures,
    Seed,
    Shape2D,
    SurfaceMesh,
    closest_point,
    compute_features,
    embed_from_plane,
    fit_plane,
    load_obj,
    project_to_plane,
    project_tumor_to_surface,
    rigid_register,
    save_obj,
    signed_distance,
    signed_distance_batch,
)

UNIT_SQUARE = Shape2D([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def ellipse_polygon(a=30.0, b=20.0, n=64, center=(0.0, 0.0)):
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return Shape2D(np.column_stack([center[0] + a * np.cos(theta), center[1] + b * np.sin(theta)]))


# -- independent oracles -------------------------------------------------


def boundary_samples(shape: Shape2D, spacing_mm: float) -> np.ndarray:
    """Dense points along every edge, endpoints included."""
    v = shape.vertices
    pts = []
    n = len(v)
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        length = np.linalg.norm(b - a)
        k = max(2, int(np.ceil(length / spacing_mm)) + 1)
        t = np.linspace(0.0, 1.0, k)
        pts.append(a + t[:, None] * (b - a))
    return np.vstack(pts)


def oracle_boundary_distance(samples: np.ndarray, p) -> float:
    d = samples - np.asarray(p)
    return float(np.sqrt((d * d).sum(axis=1)).min())


def crossings_parity_y(shape: Shape2D, p) -> bool:
    """Even-odd test with rays cast along +y (independent of the +x kernel)."""
    v = shape.vertices
    x0, y0 = p
    n = len(v)
    parity = False
    for i in range(n):
        ax, ay = v[i]
        bx, by = v[(i + 1) % n]
        if (ax > x0) != (bx > x0):
            yint = ay + (x0 - ax) * (by - ay) / (bx - ax)
            if y0 < yint:
                parity = not parity
    return parity


# -- Shape2D -------------------------------------------------------------


def test_shape_requires_three_vertices():
    with pytest.raises(ValidationError):
        Shape2D([[0, 0], [1, 0]])


def test_shape_rejects_zero_area():
    with pytest.raises(ValidationError):
        Shape2D([[0, 0], [1, 1], [2, 2]])


def test_shape_normalizes_to_ccw():
    cw = Shape2D([[0, 0], [0, 1], [1, 1], [1, 0]])
    assert cw.area > 0


def test_shape_detects_self_intersection():
    bow_tie = Shape2D([[0, 0], [2, 2], [2, 0], [0, 2]])
    assert not bow_tie.is_simple()
    assert UNIT_SQUARE.is_simple()


# -- signed distance and closest point ------------------------------------


def test_signed_distance_square_center():
    assert signed_distance(UNIT_SQUARE, (0.5, 0.5)) == -0.5


def test_signed_distance_square_outside():
    assert signed_distance(UNIT_SQUARE, (2.0, 0.5)) == 1.0


def test_signed_distance_ellipse_center():
    shape = ellipse_polygon()
    got = signed_distance(shape, (0.0, 0.0))
    samples = boundary_samples(shape, 0.001)
    want = -oracle_boundary_distance(samples, (0.0, 0.0))
    assert got == pytest.approx(want, abs=1e-6)
    assert got == pytest.approx(-20.0, abs=0.05)  # inscribed polygon sits just inside


def test_closest_point_square():
    assert np.allclose(closest_point(UNIT_SQUARE, (2.0, 0.5)), [1.0, 0.5])


def test_closest_point_on_boundary_is_identity():
    p = np.array([1.0, 0.25])
    assert np.allclose(closest_point(UNIT_SQUARE, p), p)
    assert signed_distance(UNIT_SQUARE, p) == 0.0


def test_closest_point_matches_brute_force():
    shape = ellipse_polygon(center=(40.0, 55.0))
    samples = boundary_samples(shape, 0.001)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-10, 110, size=(300, 2))
    for p in pts:
        want = oracle_boundary_distance(samples, p)
        if want < 0.05:
            continue  # oracle resolution limit right at the boundary
        got = abs(signed_distance(shape, p))
        assert got == pytest.approx(want, abs=1e-6)


def test_closest_point_lies_on_boundary():
    shape = ellipse_polygon(center=(40.0, 55.0))
    rng = np.random.default_rng(4)
    for p in rng.uniform(0, 100, size=(200, 2)):
        cp = closest_point(shape, p)
        assert abs(signed_distance(shape, cp)) <= 1e-9


def test_sign_agrees_with_independent_parity():
    shape = ellipse_polygon(a=25, b=18, center=(50.0, 50.0))
    rng = np.random.default_rng(5)
    pts = rng.uniform(0, 100, size=(10_000, 2))
    d = signed_distance_batch(shape, pts)
    keep = np.abs(d) > 1e-9
    for p, di in zip(pts[keep], d[keep]):
        assert (di < 0) == crossings_parity_y(shape, p)


# -- features --------------------------------------------------------------


def test_features_at_seed():
    shape = ellipse_polygon()
    seed = Seed(position=(5.0, 0.0))
    f = compute_features(shape, seed, (5.0, 0.0))
    assert f.d_seed_mm == 0.0
    assert f.inside


def test_features_on_margin():
    f = compute_features(UNIT_SQUARE, Seed(position=(0.5, 0.5)), (1.0, 0.5))
    assert f.d_margin_mm == 0.0
    assert f.inside  # boundary counts as inside


def test_features_offset_from_seed():
    shape = ellipse_polygon()
    seed = Seed(position=(0.0, 0.0))
    f = compute_features(shape, seed, (15.0, 0.0))
    assert f.d_seed_mm == pytest.approx(15.0, abs=1e-12)
    assert f.d_margin_mm < 0


def test_features_validate_consistency():
    with pytest.raises(ValidationError):
        DistanceFeatures(d_margin_mm=-1.0, d_seed_mm=5.0, inside=False)
    with pytest.raises(ValidationError):
        DistanceFeatures(d_margin_mm=1.0, d_seed_mm=-2.0, inside=False)


# -- plane fitting ----------------------------------------------------------


def test_fit_plane_horizontal():
    rng = np.random.default_rng(11)
    xy = rng.uniform(-20, 20, size=(50, 2))
    pts = np.column_stack([xy, np.full(50, 5.0)])
    plane = fit_plane(pts)
    assert np.allclose(np.abs(plane.normal), [0, 0, 1], atol=1e-12)
    assert plane.centroid[2] == pytest.approx(5.0)


def test_fit_plane_recovers_known_rotation():
    rng = np.random.default_rng(12)
    xy = rng.uniform(-20, 20, size=(60, 2))
    flat = np.column_stack([xy, np.zeros(60)])
    angle = 0.7
    rot = np.array(
        [[1, 0, 0], [0, np.cos(angle), -np.sin(angle)], [0, np.sin(angle), np.cos(angle)]]
    )
    plane = fit_plane(flat @ rot.T + np.array([1.0, 2.0, 3.0]))
    want = rot @ np.array([0.0, 0.0, 1.0])
    align = abs(plane.normal @ want)
    assert align == pytest.approx(1.0, abs=1e-12)


def test_fit_plane_noisy_within_one_degree():
    rng = np.random.default_rng(13)
    for _ in range(10):
        xy = rng.uniform(-25, 25, size=(200, 2))
        flat = np.column_stack([xy, np.zeros(len(xy))])
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(0, np.pi / 3)
        k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
        rot = np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)
        pts = flat @ rot.T + rng.normal(0, 0.1, size=flat.shape)
        plane = fit_plane(pts)
        want = rot @ np.array([0.0, 0.0, 1.0])
        misalign = np.degrees(np.arccos(np.clip(abs(plane.normal @ want), 0, 1)))
        assert misalign < 1.0


def test_fit_plane_residual_is_minimal():
    rng = np.random.default_rng(14)
    pts = rng.normal(size=(40, 3)) * np.array([10, 8, 0.5])
    plane = fit_plane(pts)
    q = pts - plane.centroid
    best = ((q @ plane.normal) ** 2).sum()
    for _ in range(1000):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        assert ((q @ n) ** 2).sum() >= best - 1e-9


def test_fit_plane_rejects_collinear():
    t = np.linspace(0, 1, 10)
    pts = np.column_stack([t, 2 * t, 3 * t])
    with pytest.raises(DegenerateGeometryError):
        fit_plane(pts)


# -- projection ---------------------------------------------------------------


def test_project_centroid_and_basis():
    rng = np.random.default_rng(15)
    pts = rng.normal(size=(30, 3)) * np.array([5, 5, 0.1])
    plane = fit_plane(pts)
    assert np.allclose(project_to_plane(plane.centroid, plane), [[0.0, 0.0]], atol=1e-12)
    assert np.allclose(project_to_plane(plane.centroid + 3 * plane.basis_u, plane), [[3.0, 0.0]], atol=1e-12)


def test_projection_roundtrip_preserves_coplanar_points():
    rng = np.random.default_rng(16)
    uv = rng.uniform(-30, 30, size=(40, 2))
    plane = fit_plane(rng.normal(size=(10, 3)) * np.array([10, 10, 0.01]))
    pts = embed_from_plane(uv, plane)
    back = embed_from_plane(project_to_plane(pts, plane), plane)
    assert np.abs(back - pts).max() <= 1e-9


def test_projection_preserves_pairwise_distances():
    rng = np.random.default_rng(17)
    uv = rng.uniform(-30, 30, size=(25, 2))
    plane = fit_plane(rng.normal(size=(12, 3)) * np.array([10, 10, 0.01]))
    pts = embed_from_plane(uv, plane)
    proj = project_to_plane(pts, plane)
    d3 = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
    d2 = np.linalg.norm(proj[:, None] - proj[None, :], axis=2)
    assert np.abs(d3 - d2).max() <= 1e-9


# -- surface projection ---------------------------------------------------------


def _flat_mesh(z: float, half: float = 100.0) -> SurfaceMesh:
    v = np.array([[-half, -half, z], [half, -half, z], [half, half, z], [-half, half, z]])
    return SurfaceMesh(vertices=v, triangles=np.array([[0, 1, 2], [0, 2, 3]]))


def _hemisphere_mesh(radius: float = 60.0, n_theta: int = 24, n_phi: int = 12) -> SurfaceMesh:
    verts = [[0.0, 0.0, radius]]
    for i in range(1, n_phi + 1):
        phi = (np.pi / 2) * i / n_phi
        for j in range(n_theta):
            th = 2 * np.pi * j / n_theta
            verts.append(
                [radius * np.sin(phi) * np.cos(th), radius * np.sin(phi) * np.sin(th), radius * np.cos(phi)]
            )
    tris = []
    for j in range(n_theta):
        tris.append([0, 1 + j, 1 + (j + 1) % n_theta])
    for i in range(n_phi - 1):
        ring0 = 1 + i * n_theta
        ring1 = ring0 + n_theta
        for j in range(n_theta):
            a = ring0 + j
            b = ring0 + (j + 1) % n_theta
            c = ring1 + j
            d = ring1 + (j + 1) % n_theta
            tris.append([a, b, c])
            tris.append([b, d, c])
    return SurfaceMesh(vertices=np.array(verts), triangles=np.array(tris))


def _point_triangle_distance(p, a, b, c):
    # projection onto the triangle plane, clamped to edges
    ab, ac, ap = b - a, c - a, p - a
    n = np.cross(ab, ac)
    n = n / np.linalg.norm(n)
    proj = p - (ap @ n) * n
    # barycentric check
    v0, v1, v2 = b - a, c - a, proj - a
    d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
    d20, d21 = v2 @ v0, v2 @ v1
    den = d00 * d11 - d01 * d01
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    if v >= 0 and w >= 0 and v + w <= 1:
        return abs(ap @ n)
    best = np.inf
    for e0, e1 in ((a, b), (b, c), (c, a)):
        seg = e1 - e0
        t = np.clip((p - e0) @ seg / (seg @ seg), 0, 1)
        best = min(best, np.linalg.norm(p - (e0 + t * seg)))
    return best


def test_surface_projection_flat_lift():
    circle = ellipse_polygon(a=20, b=20, n=32)
    lifted = project_tumor_to_surface(circle, _flat_mesh(z=10.0), (0, 0, 1.0), depth_mm=0.0)
    assert np.allclose(lifted[:, :2], circle.vertices, atol=1e-9)
    assert np.allclose(lifted[:, 2], 10.0, atol=1e-9)


def test_surface_projection_hits_hemisphere():
    mesh = _hemisphere_mesh()
    circle = ellipse_polygon(a=15, b=15, n=24)
    lifted = project_tumor_to_surface(circle, mesh, (0, 0, 1.0), depth_mm=0.0)
    for p in lifted:
        dmin = min(
            _point_triangle_distance(p, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]])
            for t in mesh.triangles
        )
        assert dmin <= 1e-6
    assert np.all(lifted[:, 2] > 0)


def test_surface_projection_reports_misses():
    circle = ellipse_polygon(a=10, b=10, n=8)
    with pytest.raises(ProjectionIncompleteError) as exc_info:
        project_tumor_to_surface(circle, _flat_mesh(z=10.0), (0, 0, -1.0), depth_mm=0.0)
    assert exc_info.value.missing == list(range(8))


# -- rigid registration ------------------------------------------------------


def _random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def test_rigid_register_identity():
    pts = np.array([[0.0, 0, 0], [10, 0, 0], [0, 10, 0], [0, 0, 10]])
    xf, fre = rigid_register(pts, pts)
    assert np.allclose(xf.rotation, np.eye(3), atol=1e-12)
    assert np.allclose(xf.translation, 0, atol=1e-12)
    assert fre == pytest.approx(0.0, abs=1e-12)


def test_rigid_register_pure_translation():
    pts = np.array([[0.0, 0, 0], [10, 0, 0], [0, 10, 0], [3, 4, 5]])
    xf, fre = rigid_register(pts, pts + np.array([5.0, 0, 0]))
    assert np.allclose(xf.rotation, np.eye(3), atol=1e-12)
    assert np.allclose(xf.translation, [5, 0, 0], atol=1e-12)
    assert fre < 1e-12


def test_rigid_register_construct_and_recover():
    rng = np.random.default_rng(19)
    for _ in range(20):
        src = rng.uniform(-50, 50, size=(6, 3))
        rot = _random_rotation(rng)
        t = rng.uniform(-30, 30, size=3)
        xf, fre = rigid_register(src, src @ rot.T + t)
        assert np.abs(xf.rotation - rot).max() <= 1e-9
        assert np.abs(xf.translation - t).max() <= 1e-9
        assert fre <= 1e-9


def test_rigid_register_left_invariance():
    rng = np.random.default_rng(20)
    src = rng.uniform(-40, 40, size=(5, 3))
    dst = src @ _random_rotation(rng).T + rng.uniform(-10, 10, 3) + rng.normal(0, 0.5, size=src.shape)
    q = _random_rotation(rng)
    xf, fre = rigid_register(src, dst)
    xf_q, fre_q = rigid_register(src @ q.T, dst @ q.T)
    assert np.abs(xf_q.rotation - q @ xf.rotation @ q.T).max() <= 1e-8
    assert fre_q == pytest.approx(fre, abs=1e-8)


def test_rigid_register_rejects_collinear():
    t = np.linspace(0, 1, 5)
    line = np.column_stack([t, t, t])
    with pytest.raises(DegenerateGeometryError):
        rigid_register(line, line)


# -- OBJ I/O -------------------------------------------------------------------


def test_obj_roundtrip(tmp_path):
    mesh = _flat_mesh(z=3.0)
    path = tmp_path / "m.obj"
    save_obj(mesh, path)
    back = load_obj(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)


def test_obj_reader_handles_slash_faces(tmp_path):
    path = tmp_path / "m.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2/2 3/3\n")
    mesh = load_obj(path)
    assert mesh.triangles.tolist() == [[0, 1, 2]]
