import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from aglab import geometry as G

ELL = G.ellipse(1.05, 0.9524)
SQUARE = G.rounded_polygon([[-0.7, -0.7], [0.7, -0.7], [0.7, 0.7], [-0.7, 0.7]], 0.2)
TRI = G.rounded_polygon([[-0.8, -0.5], [0.9, -0.4], [0.0, 0.8]], 0.1)
STADIUM = G.stadium((-0.5, 0.0), (0.5, 0.0), 0.5)
SHAPES = [G.disk(), ELL, G.ellipse(1.2, 0.7, (0.1, -0.2), 0.4), SQUARE, TRI, STADIUM]


def dense_ellipse(a, b, n=1_000_000):
    t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    return np.stack([a * np.cos(t), b * np.sin(t)], axis=1)


def lens_area(d):
    """Intersection area of two unit disks at center distance d."""
    if d >= 2:
        return 0.0
    return 2 * math.acos(d / 2) - 0.5 * d * math.sqrt(4 - d * d)


# -- signed distance and projection ------------------------------------------


def test_disk_signed_distance():
    d = G.disk()
    assert d.signed_distance((0, 0)) == pytest.approx(1.0, abs=1e-15)
    assert d.signed_distance((2, 0)) == pytest.approx(-1.0, abs=1e-15)


def test_ellipse_distance_matches_dense_sampling():
    pts = dense_ellipse(1.05, 0.9524)
    for x in [(0.5, 0.0), (0.1, 0.3), (-0.6, -0.5), (1.3, 0.2)]:
        brute = np.min(np.hypot(pts[:, 0] - x[0], pts[:, 1] - x[1]))
        assert abs(ELL.signed_distance(x)) == pytest.approx(brute, abs=1e-8)


def test_ellipse_projection_matches_dense_argmin():
    pts = dense_ellipse(1.05, 0.9524)
    for x in [(0.5, 0.0), (0.2, 0.4), (-0.3, -0.6)]:
        k = np.argmin(np.hypot(pts[:, 0] - x[0], pts[:, 1] - x[1]))
        assert np.allclose(ELL.metric_projection(x), pts[k], atol=1e-6)


@pytest.mark.parametrize("y1", [1e-310, 1e-200, 1e-99, 1e-60, 1e-20, 1e-8])
def test_ellipse_projection_just_off_major_axis(y1):
    # the nearest-point root shrinks with y1, so a too-loose stopping rule leaves the boundary
    pts = dense_ellipse(1.3, 0.4)
    for y0 in [0.05, 0.5, 1.5]:
        q = G.ellipse(1.3, 0.4).metric_projection((y0, y1))
        brute = np.min(np.hypot(pts[:, 0] - y0, pts[:, 1] - y1))
        assert (q[0] / 1.3) ** 2 + (q[1] / 0.4) ** 2 == pytest.approx(1.0, abs=1e-12)
        assert math.hypot(q[0] - y0, q[1] - y1) == pytest.approx(brute, abs=1e-8)


def test_ellipse_projection_is_stationary():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, (500, 2)) * [1.0, 0.9]
    assert np.max(ELL.core.stationarity_residual(x)) < 1e-10


def test_disk_projection_radial():
    assert np.allclose(G.disk().metric_projection((0.3, 0.0)), (1.0, 0.0), atol=1e-14)


def _rounded_polygon_projection_oracle(vertices, rho, x):
    """Per-edge analytic projection onto the offset edges and corner arcs."""
    v = np.asarray(vertices, float)
    best, foot = np.inf, None
    for k in range(len(v)):
        a, b = v[k], v[(k + 1) % len(v)]
        e = b - a
        t = np.clip(np.dot(x - a, e) / np.dot(e, e), 0, 1)
        q = a + t * e
        n = np.array([e[1], -e[0]]) / np.hypot(*e)
        dq = np.hypot(*(x - q))
        d = abs(np.dot(x - a, n) - rho) if 0 < t < 1 else abs(dq - rho)
        cand = q + rho * n if 0 < t < 1 else q + rho * (x - q) / dq
        if d < best:
            best, foot = d, cand
    return best, foot


@pytest.mark.parametrize("x", [(0.03, -0.05), (0.1, 0.1), (-0.2, 0.0)])
def test_rounded_polygon_projection_near_incenter(x):
    verts = TRI.core.vertices
    d, foot = _rounded_polygon_projection_oracle(verts, 0.1, np.asarray(x))
    assert TRI.signed_distance(x) == pytest.approx(d, abs=1e-12)
    assert np.allclose(TRI.metric_projection(x), foot, atol=1e-12)


# -- normals and curvature ----------------------------------------------------


def test_normals():
    assert np.allclose(G.disk().inward_normal((0.0, 1.0)), (0, -1), atol=1e-14)
    assert np.allclose(ELL.inward_normal((1.05, 0.0)), (-1, 0), atol=1e-14)
    for th in np.linspace(-1.2, 1.2, 7):
        p = (0.5 + 0.5 * math.cos(th), 0.5 * math.sin(th))
        assert np.allclose(STADIUM.inward_normal(p), (-math.cos(th), -math.sin(th)), atol=1e-12)


def test_curvature():
    assert G.disk(radius=2.0).curvature((2.0, 0.0)) == pytest.approx(0.5)
    a, b = 1.2, 0.8
    assert G.ellipse(a, b).curvature((a, 0.0)) == pytest.approx(a / b**2, rel=1e-12)
    assert SQUARE.curvature((0.9, 0.1)) == pytest.approx(0.0, abs=1e-12)
    assert SQUARE.curvature((0.7 + 0.2 / math.sqrt(2), 0.7 + 0.2 / math.sqrt(2))) == pytest.approx(5.0)


def test_corner_errors():
    sharp = G.rounded_polygon([[0, 0], [1, 0], [0, 1]], 0.0)
    with pytest.raises(G.GeometryError, match="corner"):
        sharp.inward_normal((1.0, 0.0))
    with pytest.raises(G.GeometryError, match="corner"):
        sharp.curvature((0.0, 0.0))
    with pytest.raises(G.GeometryError, match="not on the boundary"):
        G.disk().inward_normal((0.5, 0.0))


def test_c2_shapes_have_finite_curvature_everywhere():
    for dom in SHAPES:
        s = dom.boundary_samples(400)
        assert np.all(np.isfinite(dom.curvature(s.point)))
        assert np.all(s.curvature >= 0)


# -- enlargement, areas, normalisation ---------------------------------------


def test_enlarge_exact():
    big = G.disk().enlarge(0.1)
    assert big.signed_distance((0, 0)) == pytest.approx(1.1)
    sq = SQUARE.enlarge(0.15)
    assert sq.to_dict() == G.rounded_polygon(SQUARE.core.vertices, 0.35).to_dict()


def test_steiner_formula_against_monte_carlo():
    r = 0.1
    big = ELL.enlarge(r)
    steiner = ELL.area + r * ELL.perimeter + math.pi * r * r
    assert big.area == pytest.approx(steiner, rel=1e-12)
    rng = np.random.default_rng(7)
    lo, hi = big.bbox()
    n = 2_000_000
    pts = rng.uniform(lo, hi, (n, 2))
    frac = np.mean(big.signed_distance(pts) >= 0)
    box = float(np.prod(hi - lo))
    se = box * math.sqrt(frac * (1 - frac) / n)
    assert abs(frac * box - steiner) <= 3 * se


def test_perimeter_matches_polyline():
    for dom in SHAPES:
        p = dom.boundary_samples(20000).point
        poly = np.sum(np.hypot(*(np.roll(p, -1, axis=0) - p).T))
        assert poly == pytest.approx(dom.perimeter, rel=1e-6)


def test_normalize():
    d = G.disk((5.0, 3.0), 3.0).normalize()
    assert d.to_dict() == {"shape": "disk", "center": [0.0, 0.0], "radius": 1.0}
    e = G.ellipse(2.4, 1.6).normalize()
    assert e.core.a == pytest.approx(1.0) and e.core.b == pytest.approx(1.6 / 2.4)


def test_normalize_diameter_rotating_calipers():
    n = TRI.normalize()
    pts = n.boundary_samples(4000).point
    hull = pts[ConvexHull(pts).vertices]
    diam = np.max(np.hypot(hull[:, None, 0] - hull[None, :, 0], hull[:, None, 1] - hull[None, :, 1]))
    assert diam == pytest.approx(2.0, abs=1e-5)
    assert np.allclose(n.centroid, 0.0, atol=1e-12)


def test_centroid_against_monte_carlo():
    rng = np.random.default_rng(3)
    lo, hi = TRI.bbox()
    pts = rng.uniform(lo, hi, (1_000_000, 2))
    inside = pts[TRI.signed_distance(pts) >= 0]
    assert np.allclose(inside.mean(axis=0), TRI.centroid, atol=3e-3)


# -- symmetric difference and best fit ---------------------------------------


def test_symdiff_disk_self():
    assert G.disk_symmetric_difference(G.disk(), (0, 0)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("d", [0.0, 0.3, 1.0, 1.7, 2.0, 2.5])
def test_symdiff_lens_formula(d):
    got = G.disk_symmetric_difference(G.disk(), (d, 0.0))
    assert got == pytest.approx(2 * math.pi - 2 * lens_area(d), abs=1e-8)


def test_symdiff_tangent_inside():
    # unit circle internally tangent to the ellipse at (1.05, 0)
    got = G.disk_symmetric_difference(ELL, (0.05, 0.0))
    rng = np.random.default_rng(11)
    n = 2_000_000
    pts = rng.uniform(-1.1, 1.1, (n, 2))
    in_e = (pts[:, 0] / 1.05) ** 2 + (pts[:, 1] / 0.9524) ** 2 < 1
    in_b = np.hypot(pts[:, 0] - 0.05, pts[:, 1]) < 1
    frac = np.mean(in_e ^ in_b)
    se = 2.2**2 * math.sqrt(frac * (1 - frac) / n)
    assert abs(frac * 2.2**2 - got) <= 3 * se


def test_symdiff_ellipse_monte_carlo():
    got = G.disk_symmetric_difference(ELL, (0, 0))
    rng = np.random.default_rng(5)
    n, hits = 10_000_000, 0
    for _ in range(10):
        pts = rng.uniform(-1.05, 1.05, (n // 10, 2))
        in_e = (pts[:, 0] / 1.05) ** 2 + (pts[:, 1] / 0.9524) ** 2 < 1
        in_b = pts[:, 0] ** 2 + pts[:, 1] ** 2 < 1
        hits += int(np.count_nonzero(in_e ^ in_b))
    frac = hits / n
    box = 2.1**2
    se = box * math.sqrt(frac * (1 - frac) / n)
    assert abs(frac * box - got) <= 3 * se


def test_best_fit_ball_disk_and_translation():
    c, a = G.best_fit_ball(G.disk())
    assert np.allclose(c, 0, atol=G.TOL_CENTER) and a <= 1e-6
    c, a = G.best_fit_ball(G.disk((0.3, -0.2)))
    assert np.allclose(c, (0.3, -0.2), atol=G.TOL_CENTER) and a <= 1e-6


@pytest.mark.parametrize("dom", [ELL, G.ellipse(1.0, 0.9, (0.02, 0.01), 0.3), G.ellipse(1.0, 0.8)])
def test_best_fit_ball_matches_grid_scan(dom):
    c, alpha = G.best_fit_ball(dom)
    c0 = dom.centroid
    grid = np.linspace(-0.06, 0.06, 25)
    scan = min(G.disk_symmetric_difference(dom, c0 + [gx, gy]) for gx in grid for gy in grid)
    assert alpha <= scan * 1.0 + 1e-12
    assert alpha >= scan * 0.99


def test_near_disk_ellipse_facts():
    # ellipse with semi-axes 1 and 1 - b/(2 pi): |E symdiff B_1| = b/2, curvature within C b of 1
    for beta in [0.04, 0.01, 0.0025]:
        e = G.ellipse(1.0, 1.0 - beta / (2 * math.pi))
        assert G.disk_symmetric_difference(e, (0, 0)) == pytest.approx(beta / 2, rel=1e-9)
        k = e.boundary_samples(2000).curvature
        assert np.max(np.abs(k - 1)) <= 0.5 * beta


# -- serialisation --------------------------------------------------------------


def test_round_trip_and_load(tmp_path):
    for dom in SHAPES:
        d2 = G.from_dict(json.loads(json.dumps(dom.to_dict())))
        x = np.random.default_rng(0).uniform(-1.5, 1.5, (200, 2))
        assert np.allclose(d2.signed_distance(x), dom.signed_distance(x), atol=1e-14)
    p = tmp_path / "d.json"
    p.write_text(json.dumps({"shape": "ellipse", "a": 1.05, "b": 0.9524}))
    assert G.load_domain(p).area == pytest.approx(math.pi * 1.05 * 0.9524)
    with pytest.raises(FileNotFoundError, match="missing.json"):
        G.load_domain(tmp_path / "missing.json")
    with pytest.raises(G.GeometryError):
        G.from_dict({"shape": "hexagon"})
    with pytest.raises(G.GeometryError, match="missing field"):
        G.from_dict({"shape": "ellipse", "a": 1.0})


def test_invalid_shapes():
    with pytest.raises(G.GeometryError):
        G.rounded_polygon([[0, 0], [1, 0], [1, 1], [0.9, 0.2]], 0.1)
    with pytest.raises(G.GeometryError):
        G.disk(radius=0)
    with pytest.raises(G.GeometryError):
        G.ellipse(1.0, -0.5)


# -- properties -------------------------------------------------------------------

coords = st.floats(-1.6, 1.6, allow_nan=False)
points = st.tuples(coords, coords)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(range(len(SHAPES))), points, points)
def test_signed_distance_is_1_lipschitz(k, x, y):
    dom = SHAPES[k]
    dx = dom.signed_distance(x) - dom.signed_distance(y)
    assert abs(dx) <= math.dist(x, y) + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(range(len(SHAPES))), points, points, st.floats(0, 1))
def test_signed_distance_is_concave(k, x, y, t):
    dom = SHAPES[k]
    z = (t * x[0] + (1 - t) * y[0], t * x[1] + (1 - t) * y[1])
    assert dom.signed_distance(z) >= t * dom.signed_distance(x) + (1 - t) * dom.signed_distance(y) - 1e-9


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(range(len(SHAPES))), points)
def test_projection_lands_on_boundary_at_distance(k, x):
    dom = SHAPES[k]
    d, b = dom.distance_and_projection(x)
    assert abs(dom.signed_distance(b)) <= 1e-9
    assert math.dist(x, b) == pytest.approx(abs(d), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(range(len(SHAPES))), st.floats(0, 1), st.floats(0, 1))
def test_convexity_midpoints_inside(k, s, t):
    dom = SHAPES[k]
    p, _, _ = dom.boundary_at(np.array([s, t]) * dom.perimeter)
    assert dom.signed_distance(0.5 * (p[0] + p[1])) >= -G.TOL_GEOM
