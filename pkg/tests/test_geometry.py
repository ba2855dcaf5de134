import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatobs.geometry import (InvalidCurveError, Polygon, PolarCurve, hausdorff_curves, hausdorff_distance,
                              point_in_polygon, points_in_polygon, read_polygons, sample_polar_boundary,
                              write_polygons)

from conftest import DOMAIN, OBSTACLE_1


def test_circle_four_vertices():
    p = sample_polar_boundary(PolarCurve.circle((0, 0), 1.0), 4)
    np.testing.assert_allclose(p.vertices, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)


def test_domain_vertex_at_pi_over_6():
    p = sample_polar_boundary(DOMAIN, 100)
    theta = np.arctan2(p.vertices[:, 1], p.vertices[:, 0])
    i = np.argmin(np.abs(theta - np.pi / 6))
    # 100 samples do not hit pi/6 exactly; the radius function does
    assert DOMAIN.radius_at(np.pi / 6) == pytest.approx(1.1, abs=1e-15)
    assert np.hypot(*p.vertices[i]) == pytest.approx(float(DOMAIN.radius_at(theta[i])), abs=1e-14)
    assert len(p.vertices) == 100


def test_obstacle_vertex_at_zero():
    p = sample_polar_boundary(OBSTACLE_1, 100)
    np.testing.assert_allclose(p.vertices[0], [0.6, 0.0], atol=1e-15)


def test_nonpositive_radius_rejected():
    with pytest.raises(InvalidCurveError):
        PolarCurve.trig(0.1, [(2, 0.2, 0.0)]).validate()
    with pytest.raises(InvalidCurveError):
        sample_polar_boundary(PolarCurve.trig(0.1, [(2, 0.2, 0.0)]), 64)


def test_disk_union_components():
    u = PolarCurve.disk_union([PolarCurve.circle((-0.3, -0.3), 0.2), PolarCurve.circle((0.4, 0.3), 0.15)])
    polys = sample_polar_boundary(u, 64)
    assert len(polys) == 2
    assert polys[0].area == pytest.approx(np.pi * 0.04, rel=2e-3)
    assert u.contains((-0.3, -0.3)) and u.contains((0.4, 0.3)) and not u.contains((0.0, 0.0))


def test_point_in_polygon_examples(unit_square):
    assert point_in_polygon(unit_square, (0.5, 0.5))
    assert not point_in_polygon(unit_square, (2.0, 0.0))
    assert point_in_polygon(sample_polar_boundary(OBSTACLE_1, 100), (0.59, 0.0))


def test_hausdorff_identical_and_concentric():
    a = sample_polar_boundary(OBSTACLE_1, 100)
    assert hausdorff_distance(a, a) == 0.0
    c5 = sample_polar_boundary(PolarCurve.circle((0, 0), 0.5), 512)
    c8 = sample_polar_boundary(PolarCurve.circle((0, 0), 0.8), 512)
    assert hausdorff_distance(c5, c8) == pytest.approx(0.3, abs=1e-3)


def _dense_points(poly: Polygon, n: int) -> np.ndarray:
    a, b = poly.segments()
    s = np.cumsum(np.r_[0, poly.edge_lengths()])
    u = np.linspace(0, s[-1], n, endpoint=False)
    i = np.searchsorted(s, u, side="right") - 1
    lam = ((u - s[i]) / (s[i + 1] - s[i]))[:, None]
    return a[i] + lam * (b[i] - a[i])


def test_hausdorff_matches_brute_force():
    a = sample_polar_boundary(OBSTACLE_1, 512)
    b = sample_polar_boundary(PolarCurve.circle((0, 0), 0.5), 512)
    pa, pb = _dense_points(a, 10_000), _dense_points(b, 10_000)

    def directed(p, q):
        best = 0.0
        for chunk in np.array_split(p, 20):
            d = np.sqrt(((chunk[:, None, :] - q[None, :, :]) ** 2).sum(-1)).min(1)
            best = max(best, d.max())
        return best

    brute = max(directed(pa, pb), directed(pb, pa))
    assert hausdorff_distance(a, b) == pytest.approx(brute, abs=1e-4)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 1.0), st.floats(0.2, 1.0), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_hausdorff_metric_properties(r1, r2, cx, cy):
    a = sample_polar_boundary(PolarCurve.circle((0, 0), r1), 200)
    b = sample_polar_boundary(PolarCurve.circle((cx, cy), r2), 200)
    d = hausdorff_distance(a, b)
    assert d >= 0
    assert d == pytest.approx(hausdorff_distance(b, a), abs=1e-12)
    # two circles: distance is |r1 - r2| + centre offset, up to chord sagitta
    assert d == pytest.approx(abs(r1 - r2) + np.hypot(cx, cy), abs=2e-4 + 1e-3 * max(r1, r2))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 1.0), st.lists(st.tuples(st.integers(1, 5), st.floats(-0.05, 0.05), st.floats(-0.05, 0.05)),
                                     max_size=3), st.integers(16, 200))
def test_sampled_polygon_is_simple_and_ccw(base, harmonics, n):
    p = sample_polar_boundary(PolarCurve.trig(base, harmonics), n)
    assert p.signed_area > 0
    assert p.is_simple()
    inside = points_in_polygon(p, np.array([[0.0, 0.0], [5.0, 5.0]]))
    assert inside.tolist() == [True, False]


def test_polygon_file_round_trip(tmp_path):
    polys = sample_polar_boundary(PolarCurve.disk_union([PolarCurve.circle((0, 0), 0.2),
                                                         PolarCurve.circle((0.5, 0), 0.1)]), 32)
    write_polygons(tmp_path / "f.csv", polys)
    back = read_polygons(tmp_path / "f.csv")
    assert len(back) == 2
    for p, q in zip(polys, back):
        np.testing.assert_array_equal(p.vertices, q.vertices)
    assert hausdorff_curves(polys, back) == 0.0
