import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from heatobs import linsolve
from heatobs.assembly import (EmptyRegionError, assemble_poisson, assemble_qr_rhs, assemble_qr_system, p1_mass,
                              p1_stiffness, rt0_divdiv, rt0_mass, time_factors)
from heatobs.geometry import PolarCurve, sample_polar_boundary
from heatobs.mesh import SubmeshView, TimeGrid, TriMesh, make_time_grid, tag_gamma, triangulate
from heatobs.spaces import build_flux_space, build_scalar_space

from conftest import DOMAIN
from oracles import brute_force_qr_matrix, brute_force_qr_rhs

RIGHT_TRIANGLE = TriMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


def qr_system(mesh, grid, eps=0.01, gamma=None):
    return assemble_qr_system(build_scalar_space(mesh, grid), build_flux_space(mesh, grid), gamma, eps)


@pytest.fixture(scope="module")
def small_mesh():
    m = triangulate(sample_polar_boundary(DOMAIN, 12), [], target_h=0.6)
    return tag_gamma(m, [(0, np.pi / 2), (np.pi, 1.5 * np.pi)])


@pytest.fixture(scope="module")
def uneven_grid():
    return TimeGrid(1.0, np.array([0, 0.1, 0.35, 0.5, 0.8, 1.0]))


def test_single_prism_matches_brute_force():
    g = make_time_grid(1.0, 1)
    s = qr_system(RIGHT_TRIANGLE, g, eps=1.0)
    ref = brute_force_qr_matrix(RIGHT_TRIANGLE, g.nodes, s.gamma_edges, 1.0)
    np.testing.assert_allclose(s.matrix.toarray(), ref, atol=1e-12, rtol=0)


@pytest.mark.parametrize("eps", [1.0, 0.01])
def test_small_mesh_matches_brute_force(small_mesh, uneven_grid, eps):
    assert small_mesh.n_triangles <= 50
    s = qr_system(small_mesh, uneven_grid, eps)
    ref = brute_force_qr_matrix(small_mesh, uneven_grid.nodes, s.gamma_edges, eps)
    np.testing.assert_allclose(s.matrix.toarray(), ref, atol=1e-12, rtol=0)


def test_rhs_matches_brute_force(small_mesh, uneven_grid):
    s = qr_system(small_mesh, uneven_grid)
    rng = np.random.default_rng(0)
    g0 = rng.random((len(s.gamma_edges), 6))
    g0[:, 0] = 0
    g1 = rng.random((len(s.gamma_edges), 5))
    ref = brute_force_qr_rhs(small_mesh, uneven_grid.nodes, s.gamma_edges, g0, g1)
    np.testing.assert_allclose(assemble_qr_rhs(s, g0, g1), ref, atol=1e-12, rtol=0)


def test_exact_symmetry_and_spectra(small_mesh, uneven_grid):
    s = qr_system(small_mesh, uneven_grid, 0.01)
    A = s.matrix.toarray()
    assert np.max(np.abs(A - A.T)) == 0.0
    assert np.linalg.eigvalsh(s.a0.toarray()).min() > -1e-12
    assert np.linalg.eigvalsh(s.gram.toarray()).min() > 0
    # generalised eigenvalues of (A, R) are 0.01 + eig(A0, R) >= min(eps, 1)
    lam = scipy.linalg.eigh(A, s.gram.toarray(), eigvals_only=True)
    assert lam.min() >= 0.01 * (1 - 1e-9)
    np.testing.assert_allclose(A, (s.a0 + 0.01 * s.gram).toarray(), atol=1e-14)
    linsolve.factorize(s.matrix)  # Cholesky-type factorisation succeeds


def test_epsilon_must_be_positive(small_mesh):
    g = make_time_grid(1.0, 2)
    with pytest.raises(ValueError):
        qr_system(small_mesh, g, 0.0)


def test_no_gamma_warns_but_stays_spd(small_mesh):
    g = make_time_grid(1.0, 2)
    with pytest.warns(RuntimeWarning):
        s = qr_system(small_mesh, g, 0.1, gamma=np.array([], dtype=np.int64))
    linsolve.factorize(s.matrix)


def test_right_triangle_closed_forms():
    K = p1_stiffness(RIGHT_TRIANGLE).toarray()
    np.testing.assert_allclose(np.diag(K), [1.0, 0.5, 0.5], atol=1e-15)
    M = p1_mass(RIGHT_TRIANGLE).toarray()
    np.testing.assert_allclose(M, 0.5 / 12 * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]), atol=1e-15)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 0.5), st.integers(0, 100))
def test_mass_and_stiffness_properties(h, seed):
    m = triangulate(sample_polar_boundary(DOMAIN, int(2 * np.pi / h) + 3), [], h, seed=seed)
    K, M = p1_stiffness(m), p1_mass(m)
    np.testing.assert_allclose(np.asarray(K.sum(axis=1)).ravel(), 0, atol=1e-12)
    assert M.sum() == pytest.approx(m.areas.sum(), abs=1e-10)
    # int grad(x) . grad(x) = area
    x = m.vertices[:, 0]
    assert x @ K @ x == pytest.approx(m.areas.sum(), rel=1e-12)
    # RT0 mass reproduces the constant field (1, 0): each edge dof is its normal component n_x
    F = rt0_mass(m)
    q = m.edge_normals[:, 0]
    assert q @ F @ q == pytest.approx(m.areas.sum(), rel=1e-12)
    assert abs(q @ rt0_divdiv(m) @ q) < 1e-10


def test_time_factor_identities():
    tf = time_factors(TimeGrid(1.0, np.array([0, 0.2, 0.5, 1.0])))
    ones = np.ones(4)
    # int psi_k over (0, T) for nodes 1..N
    np.testing.assert_allclose(tf.mass_full @ ones, [0.25, 0.4, 0.25])
    np.testing.assert_allclose(tf.p0_mass.diagonal(), [0.2, 0.3, 0.5])
    # int_{I_a} psi_k' = +1 on the interval where node k rises, -1 where it falls
    np.testing.assert_array_equal(tf.deriv_p0.toarray(), [[1, -1, 0], [0, 1, -1], [0, 0, 1]])


def test_rhs_zero_and_constant_data(small_mesh):
    g = make_time_grid(1.0, 1)
    s = qr_system(small_mesh, g)
    n = len(s.gamma_edges)
    assert not assemble_qr_rhs(s, np.zeros((n, 2)), np.zeros((n, 1))).any()
    b = assemble_qr_rhs(s, np.ones((n, 2)), np.zeros((n, 1)))
    expected = np.zeros(small_mesh.n_vertices)
    for e in s.gamma_edges:  # |e| / 2 per endpoint times int_0^1 psi_1 = 1/2
        expected[small_mesh.edges[e]] += small_mesh.edge_lengths[e] / 2 * 0.5
    np.testing.assert_allclose(b[:s.n_scalar], expected, atol=1e-15)
    assert not b[s.n_scalar:].any()
    with pytest.raises(ValueError):
        assemble_qr_rhs(s, np.ones((n, 3)), np.zeros((n, 1)))


def test_rhs_iterated_correction(small_mesh, uneven_grid):
    s = qr_system(small_mesh, uneven_grid, 0.01)
    rng = np.random.default_rng(1)
    n = len(s.gamma_edges)
    g0, g1 = rng.random((n, 6)), rng.random((n, 5))
    g0[:, 0] = 0
    b0 = assemble_qr_rhs(s, g0, g1)
    x0 = linsolve.solve(linsolve.factorize(s.matrix), b0)
    b1 = assemble_qr_rhs(s, g0, g1, previous=s.split(x0))
    np.testing.assert_allclose(b1 - b0, 0.01 * (s.gram @ x0), atol=1e-15)


def _disk_mesh(h):
    return triangulate(sample_polar_boundary(PolarCurve.circle((0, 0), 1.0), int(round(2 * np.pi / h))), [], h)


def test_poisson_constants_reproduced():
    m = _disk_mesh(0.2)
    view = SubmeshView(m, np.arange(m.n_triangles))
    pois = assemble_poisson(view, 0.0, np.full(m.n_vertices, 0.7))
    phi = pois.expand(linsolve.solve(linsolve.factorize(pois.matrix), pois.rhs))
    np.testing.assert_allclose(phi, 0.7, atol=1e-12)


def test_poisson_disk_analytic():
    m = _disk_mesh(0.05)
    view = SubmeshView(m, np.arange(m.n_triangles))
    c = 0.3
    pois = assemble_poisson(view, 4.0, np.full(m.n_vertices, c))
    phi = pois.expand(linsolve.solve(linsolve.factorize(pois.matrix), pois.rhs))
    exact = c + np.sum(m.vertices**2, axis=1) - 1.0
    # boundary vertices sit on the unit circle, so the Dirichlet data is exact there
    assert np.abs(phi - exact).max() <= 0.01


def test_poisson_load_entries(domain_mesh):
    m = domain_mesh
    keep = np.flatnonzero(np.hypot(*m.centroids.T) < 0.8)
    view = SubmeshView(m, keep)
    f = 20.0
    pois = assemble_poisson(view, f, np.zeros(m.n_vertices))
    sub = view.mesh
    adj = np.zeros(sub.n_vertices)
    np.add.at(adj, sub.triangles.ravel(), np.repeat(sub.areas, 3))
    np.testing.assert_allclose(pois.load, f * adj / 3, rtol=1e-14)
    # weak form int grad phi . grad w = -int f w
    np.testing.assert_allclose(pois.rhs, -pois.load[pois.free], rtol=1e-14)


def test_poisson_errors(domain_mesh):
    with pytest.raises(EmptyRegionError):
        assemble_poisson(SubmeshView(domain_mesh, np.zeros(0, dtype=np.int64)), 1.0, {})
    view = SubmeshView(domain_mesh, np.arange(10))
    with pytest.raises(ValueError):
        assemble_poisson(view, 1.0, {})


def test_matrix_market_export(tmp_path, small_mesh):
    import scipy.io
    s = qr_system(small_mesh, make_time_grid(1.0, 2))
    s.export_matrix_market(tmp_path / "a.mtx")
    back = sp.csr_matrix(scipy.io.mmread(str(tmp_path / "a.mtx")))
    np.testing.assert_allclose(back.toarray(), s.matrix.toarray(), atol=1e-15)
