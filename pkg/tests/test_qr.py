import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatobs.forward import CauchyData, DirichletDataSpec, ForwardHistory, GammaMismatchError, extract_cauchy, \
    solve_forward
from heatobs.geometry import sample_polar_boundary
from heatobs.mesh import SubmeshView, make_time_grid, tag_gamma, triangulate
from heatobs.qr import QrParams, qr_error_report, solve_qr

from conftest import DOMAIN, OBSTACLE_1


def zero_data(mesh, grid):
    from heatobs.mesh import EdgeTag
    gamma = mesh.edges_with_tag(EdgeTag.GAMMA_MEASURED)
    n = len(gamma)
    return CauchyData(gamma, mesh.edge_lengths[gamma], grid.nodes, np.zeros((n, grid.n_intervals + 1)),
                      np.zeros((n, grid.n_intervals)))


@pytest.fixture(scope="module")
def setting(coarse_domain_mesh):
    grid = make_time_grid(1.0, 8)
    fwd = triangulate(sample_polar_boundary(DOMAIN, 45), [sample_polar_boundary(OBSTACLE_1, 30)],
                      2 * np.pi / 45, seed=1)
    hist = solve_forward(fwd, make_time_grid(1.0, 32), DirichletDataSpec("g1"))
    data = extract_cauchy(hist, coarse_domain_mesh, grid)
    keep = np.flatnonzero([not OBSTACLE_1.contains(c) for c in coarse_domain_mesh.centroids])
    return grid, data, SubmeshView(coarse_domain_mesh, keep)


def test_params_validation():
    with pytest.raises(ValueError):
        QrParams(epsilon=0.0)
    with pytest.raises(ValueError):
        QrParams(M=-1)


def test_zero_data_gives_exact_zero(coarse_domain_mesh):
    grid = make_time_grid(1.0, 4)
    sol = solve_qr(coarse_domain_mesh, grid, zero_data(coarse_domain_mesh, grid), QrParams(0.01, 3))
    assert not sol.scalar.coeffs.any() and not sol.flux.coeffs.any()
    assert sol.misfit == [0.0] * 4 and sol.residual == [0.0] * 4


def test_solution_shapes_and_diagnostics(setting, tmp_path):
    grid, data, view = setting
    sol = solve_qr(view, grid, data, QrParams(0.01, 5))
    assert sol.iterations == 5
    assert sol.scalar.coeffs.shape == (view.mesh.n_vertices * 8,)
    assert sol.flux.coeffs.shape == (view.mesh.n_edges * 8,)
    assert np.all(np.isfinite(sol.misfit)) and np.all(np.isfinite(sol.residual))
    np.testing.assert_array_equal(sol.parent_vertices, view.parent_vertices)
    sol.write_diagnostics(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "M,misfit,residual" and len(lines) == 7


def test_misfit_matches_direct_boundary_norm(setting):
    """The quadratic-form misfit equals the L2(Sigma) norms of v - g0 and q.n - g1."""
    grid, data, view = setting
    sol = solve_qr(view, grid, data, QrParams(0.01, 0))
    mesh = sol.mesh
    gamma = sol.system.gamma_edges
    rows = data.rows_for(view.edge_to_parent[gamma])
    v = sol.scalar.nodal()
    ends = (v[mesh.edges[gamma, 0]] - data.g0[rows], v[mesh.edges[gamma, 1]] - data.g0[rows])
    from heatobs.assembly import time_mass
    Mt = time_mass(grid.nodes).toarray()
    lens = data.edge_lengths[rows]
    # int_e (linear)^2 = |e| (a^2 + ab + b^2) / 3 at each time, then P1 in time
    v0 = sum(lens[r] / 3 * (ends[0][r] @ Mt @ ends[0][r] + ends[0][r] @ Mt @ ends[1][r] + ends[1][r] @ Mt @ ends[1][r])
             for r in range(len(gamma)))
    qn = sol.flux.edge_values()[gamma]
    v1 = np.sum(lens[:, None] * grid.tau[None, :] * (qn - data.g1[rows]) ** 2)
    assert sol.misfit[0] == pytest.approx(v0 + v1, rel=1e-8)


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.1, 0.01]))
def test_energy_non_increasing_in_iterations(coarse_domain_mesh, seed, eps):
    """Iterated regularisation is a proximal-point method: misfit + residual never increases."""
    grid = make_time_grid(1.0, 4)
    data = zero_data(coarse_domain_mesh, grid)
    rng = np.random.default_rng(seed)
    data.g0[:, 1:] = rng.standard_normal(data.g0[:, 1:].shape)
    data.g1[:] = rng.standard_normal(data.g1.shape)
    sol = solve_qr(coarse_domain_mesh, grid, data, QrParams(eps, 8))
    energy = np.array(sol.misfit) + np.array(sol.residual)
    assert np.all(np.diff(energy) <= 1e-10 * energy[0])


def test_error_report_against_itself(setting):
    grid, data, view = setting
    sol = solve_qr(view, grid, data, QrParams(0.01, 2))
    sub = view.mesh
    from heatobs.assembly import p1_mass, p1_stiffness
    ref = ForwardHistory(sub, grid, sol.scalar.nodal(), p1_mass(sub), p1_stiffness(sub))
    rep = qr_error_report(sol, ref, times=(0.5,))
    assert rep.rel_l2 == pytest.approx(0.0, abs=1e-13)
    assert rep.rel_h1 == pytest.approx(0.0, abs=1e-13)


def test_missing_data_on_measured_edges(setting):
    grid, data, view = setting
    part = CauchyData(data.gamma_edges[:3], data.edge_lengths[:3], data.nodes, data.g0[:3], data.g1[:3])
    with pytest.raises(GammaMismatchError):
        solve_qr(view, grid, part)


def test_no_measured_edge_warns(coarse_domain_mesh):
    grid = make_time_grid(1.0, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        silent = tag_gamma(coarse_domain_mesh, [(0, 1e-9)])
    data = zero_data(silent, grid)
    with pytest.warns(RuntimeWarning):
        sol = solve_qr(silent, grid, data, QrParams(0.1, 1))
    assert not sol.scalar.coeffs.any()
