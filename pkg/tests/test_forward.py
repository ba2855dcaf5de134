import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatobs.forward import (CauchyData, DirichletDataSpec, GammaMismatchError, IncompatibleDataError, add_noise,
                             boundary_flux, extract_cauchy, solve_forward)
from heatobs.geometry import Polygon, PolarCurve, sample_polar_boundary
from heatobs.mesh import EdgeTag, make_time_grid, tag_gamma, triangulate

from conftest import DOMAIN, OBSTACLE_1

CENTRED_SQUARE = Polygon(np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]))


def cosine_mode(x, y, t):
    """Heat solution on (-1/2, 1/2)^2 vanishing on the boundary."""
    return np.exp(-2 * np.pi**2 * t) * np.cos(np.pi * x) * np.cos(np.pi * y)


def test_zero_data_gives_zero(coarse_domain_mesh):
    h = solve_forward(coarse_domain_mesh, make_time_grid(1.0, 5), None)
    assert not h.values.any()


def test_dirichlet_kinds_vanish_at_zero():
    t = np.array([0.0, 0.25, 1.0])
    for kind in ("g1", "g2"):
        g = DirichletDataSpec(kind)(np.ones(3), np.zeros(3), t)
        assert g[0] == 0 and g[2] == 0
    assert DirichletDataSpec("g1")(0.0, 1.0, 0.5) == 1.0
    assert DirichletDataSpec("g2")(1.0, 0.0, 0.5) == pytest.approx(np.cos(-2 * np.pi))


def test_incompatible_initial_data(coarse_domain_mesh):
    with pytest.raises(IncompatibleDataError):
        solve_forward(coarse_domain_mesh, make_time_grid(1.0, 2),
                      DirichletDataSpec("custom", lambda x, y, t: 1.0 + 0 * t))


def test_square_with_hole_matches_square():
    """The mode sin(4 pi x) sin(4 pi y) also vanishes on the hole (1/4, 3/4)^2."""
    sq = Polygon(np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]]))
    hole = Polygon(np.array([[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]]))
    h = 0.025
    full = triangulate(sq, [], h)
    holed = triangulate(sq, [hole], h)
    T = 2 / (32 * np.pi**2)
    grid = make_time_grid(T, 60)

    def u0(m):
        x, y = m.vertices.T
        return np.sin(4 * np.pi * x) * np.sin(4 * np.pi * y)

    a = solve_forward(full, grid, None, initial=u0(full)).values[:, -1]
    b = solve_forward(holed, grid, None, initial=u0(holed)).values[:, -1]
    tri, bary = full.locate(holed.vertices)
    assert np.all(tri >= 0)
    a_on_b = np.einsum("ij,ij->i", a[full.triangles[tri]], bary)
    d = a_on_b - b
    mass = solve_forward(holed, make_time_grid(1, 1), None).mass
    assert np.sqrt(d @ mass @ d) <= 0.05 * np.sqrt(b @ mass @ b)


def test_consistent_flux_matches_analytic_normal_derivative():
    m = triangulate(CENTRED_SQUARE, [], 0.03)
    T = 0.05
    grid = make_time_grid(T, 200)
    hist = solve_forward(m, grid, None, initial=cosine_mode(*m.vertices.T, 0.0))
    verts, flux = boundary_flux(hist)
    x, y = m.vertices[verts].T
    side = np.abs(np.abs(x) - 0.5) < 1e-12
    mid = side & (np.abs(y) < 0.4)
    # outward derivative on x = +-1/2: -pi cos(pi y) e^{-2 pi^2 t}
    exact = -np.pi * np.cos(np.pi * y[mid]) * np.exp(-2 * np.pi**2 * T)
    np.testing.assert_allclose(flux[mid, -1], exact, rtol=0.05, atol=0.02)


def test_extract_cauchy_on_coarser_mesh():
    fine = triangulate(CENTRED_SQUARE, [], 0.03)
    coarse = triangulate(CENTRED_SQUARE, [], 0.1, seed=1)
    T = 0.05
    hist = solve_forward(fine, make_time_grid(T, 200), None, initial=cosine_mode(*fine.vertices.T, 0.0))
    cd = extract_cauchy(hist, coarse, make_time_grid(T, 10))
    assert len(cd.gamma_edges) == len(coarse.boundary_edges)
    assert cd.g0.shape == (len(cd.gamma_edges), 11) and cd.g1.shape == (len(cd.gamma_edges), 10)
    assert not cd.g0[:, 0].any()
    # temperature vanishes on the boundary
    assert np.abs(cd.g0).max() < 1e-12
    mids = coarse.edge_midpoints[cd.gamma_edges]
    on_x = (np.abs(np.abs(mids[:, 0]) - 0.5) < 1e-12) & (np.abs(mids[:, 1]) < 0.35)
    b = 0.045  # last interval is (0.045, 0.05]
    t_avg = (np.exp(-2 * np.pi**2 * b) - np.exp(-2 * np.pi**2 * T)) / (2 * np.pi**2 * (T - b))
    exact = -np.pi * np.cos(np.pi * mids[on_x, 1]) * t_avg
    np.testing.assert_allclose(cd.g1[on_x, -1], exact, rtol=0.05, atol=0.02)


def test_zero_history_gives_zero_data(coarse_domain_mesh):
    fwd = triangulate(sample_polar_boundary(DOMAIN, 45), [sample_polar_boundary(OBSTACLE_1, 30)],
                      2 * np.pi / 45, seed=1)
    hist = solve_forward(fwd, make_time_grid(1.0, 8), None)
    cd = extract_cauchy(hist, coarse_domain_mesh, make_time_grid(1.0, 4))
    assert not cd.g0.any() and not cd.g1.any()


def test_gamma_mismatch_detected(coarse_domain_mesh):
    shrunk = triangulate(sample_polar_boundary(PolarCurve.circle((0, 0), 0.5), 30), [], 0.1)
    hist = solve_forward(shrunk, make_time_grid(1.0, 4), DirichletDataSpec("g1"))
    with pytest.raises(GammaMismatchError):
        extract_cauchy(hist, coarse_domain_mesh, make_time_grid(1.0, 4))
    cd = CauchyData(np.array([1, 2]), np.ones(2), np.linspace(0, 1, 3), np.zeros((2, 3)), np.zeros((2, 2)))
    with pytest.raises(GammaMismatchError):
        cd.rows_for(np.array([3]))


@pytest.fixture(scope="module")
def exact_data(coarse_domain_mesh):
    fwd = triangulate(sample_polar_boundary(DOMAIN, 45), [sample_polar_boundary(OBSTACLE_1, 30)],
                      2 * np.pi / 45, seed=1)
    inv = tag_gamma(coarse_domain_mesh, [(0, np.pi / 2), (np.pi, 3 * np.pi / 2)])
    hist = solve_forward(fwd, make_time_grid(1.0, 40), DirichletDataSpec("g2"))
    return extract_cauchy(hist, inv, make_time_grid(1.0, 10), gamma_spec="0:1.5708,3.14159:4.71239")


def test_partial_gamma_data(exact_data, coarse_domain_mesh):
    inv = tag_gamma(coarse_domain_mesh, [(0, np.pi / 2), (np.pi, 3 * np.pi / 2)])
    np.testing.assert_array_equal(exact_data.gamma_edges, inv.edges_with_tag(EdgeTag.GAMMA_MEASURED))
    assert np.abs(exact_data.g0).max() > 0.1


def test_noise_zero_delta_is_identity(exact_data):
    out = add_noise(exact_data, 0.0, 5)
    np.testing.assert_array_equal(out.g0, exact_data.g0)
    np.testing.assert_array_equal(out.g1, exact_data.g1)


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([0.05, 0.1, 0.3]), st.integers(0, 2**31 - 1))
def test_noise_norm_is_exact(exact_data, delta, seed):
    out = add_noise(exact_data, delta, seed)
    assert exact_data.sigma_norm(out.g0 - exact_data.g0) == pytest.approx(delta, abs=1e-12)
    assert not (out.g0 - exact_data.g0)[:, 0].any()
    np.testing.assert_array_equal(out.g1, exact_data.g1)


def test_noise_seeds_differ(exact_data):
    a, b = add_noise(exact_data, 0.1, 1), add_noise(exact_data, 0.1, 2)
    assert not np.allclose(a.g0, b.g0)
    np.testing.assert_array_equal(add_noise(exact_data, 0.1, 1).g0, a.g0)


def test_cauchy_csv_round_trip(tmp_path, exact_data):
    noisy = add_noise(exact_data, 0.05, 3)
    noisy.to_csv(tmp_path / "c.csv")
    back = CauchyData.from_csv(tmp_path / "c.csv")
    np.testing.assert_array_equal(back.gamma_edges, noisy.gamma_edges)
    np.testing.assert_array_equal(back.g0, noisy.g0)
    np.testing.assert_array_equal(back.g1, noisy.g1)
    np.testing.assert_allclose(back.nodes, noisy.nodes, atol=1e-15)
    assert (back.delta, back.seed) == (0.05, 3)
