"""Sparse operators for the space-time mixed system, the heat equation and
the level-set Poisson problem.

The space-time operators are Kronecker products ``kron(space, time)`` of a
2D factor on the triangulation with a 1D factor on the time grid, which
matches the vertex-major / edge-major degree-of-freedom layout of
:mod:`heatobs.spaces`.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import EdgeTag, SubmeshView, TimeGrid, TriMesh
from .spaces import FluxSpace, ScalarSpace, SpaceTimeFluxField, SpaceTimeScalarField

log = logging.getLogger(__name__)


class EmptyRegionError(ValueError):
    """The region a problem should be posed on has no triangles."""


# -- 2D factors ---------------------------------------------------------------

def _bary_grads(mesh: TriMesh) -> np.ndarray:
    """(nT, 3, 2) gradients of the barycentric coordinates."""
    p = mesh.vertices[mesh.triangles]
    area2 = 2 * mesh.areas
    g = np.empty((mesh.n_triangles, 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        g[:, i, 0] = (p[:, j, 1] - p[:, k, 1]) / area2
        g[:, i, 1] = (p[:, k, 0] - p[:, j, 0]) / area2
    return g


def _scatter(rows, cols, vals, shape) -> sp.csr_matrix:
    m = sp.coo_matrix((np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=shape).tocsr()
    m.sum_duplicates()
    return m


def p1_mass(mesh: TriMesh) -> sp.csr_matrix:
    loc = np.array([[2.0, 1, 1], [1, 2, 1], [1, 1, 2]]) / 12.0
    t = mesh.triangles
    vals = mesh.areas[:, None, None] * loc[None]
    return _scatter(np.repeat(t[:, :, None], 3, 2), np.repeat(t[:, None, :], 3, 1), vals,
                    (mesh.n_vertices,) * 2)


def p1_stiffness(mesh: TriMesh) -> sp.csr_matrix:
    g = _bary_grads(mesh)
    vals = mesh.areas[:, None, None] * np.einsum("kid,kjd->kij", g, g)
    t = mesh.triangles
    return _scatter(np.repeat(t[:, :, None], 3, 2), np.repeat(t[:, None, :], 3, 1), vals,
                    (mesh.n_vertices,) * 2)


def p1_boundary_mass(mesh: TriMesh, edge_ids) -> sp.csr_matrix:
    edge_ids = np.asarray(edge_ids, dtype=np.int64)
    e = mesh.edges[edge_ids]
    L = mesh.edge_lengths[edge_ids]
    loc = np.array([[2.0, 1], [1, 2]]) / 6.0
    vals = L[:, None, None] * loc[None]
    return _scatter(np.repeat(e[:, :, None], 2, 2), np.repeat(e[:, None, :], 2, 1), vals,
                    (mesh.n_vertices,) * 2)


def _rt0_scale(mesh: TriMesh) -> np.ndarray:
    return mesh.edge_sign * mesh.edge_lengths[mesh.tri_edges] / (2 * mesh.areas[:, None])


def rt0_mass(mesh: TriMesh) -> sp.csr_matrix:
    """int psi_i . psi_j, with psi_i = c_i (x - p_i); edge-midpoint rule is exact."""
    p = mesh.vertices[mesh.triangles]                      # (nT, 3, 2)
    mids = 0.5 * (p[:, [1, 2, 0]] + p[:, [2, 0, 1]])       # (nT, 3 quad pts, 2)
    c = _rt0_scale(mesh)
    # diff[k, q, i] = m_q - p_i
    diff = mids[:, :, None, :] - p[:, None, :, :]
    vals = np.einsum("kqid,kqjd->kij", diff, diff) * (mesh.areas / 3)[:, None, None]
    vals *= c[:, :, None] * c[:, None, :]
    te = mesh.tri_edges
    return _scatter(np.repeat(te[:, :, None], 3, 2), np.repeat(te[:, None, :], 3, 1), vals,
                    (mesh.n_edges,) * 2)


def rt0_divdiv(mesh: TriMesh) -> sp.csr_matrix:
    div = 2 * _rt0_scale(mesh)  # div psi_i = 2 c_i
    vals = div[:, :, None] * div[:, None, :] * mesh.areas[:, None, None]
    te = mesh.tri_edges
    return _scatter(np.repeat(te[:, :, None], 3, 2), np.repeat(te[:, None, :], 3, 1), vals,
                    (mesh.n_edges,) * 2)


def p1_rt0_div(mesh: TriMesh) -> sp.csr_matrix:
    """int phi_a div psi_j, shape (n_vertices, n_edges)."""
    div = 2 * _rt0_scale(mesh)
    vals = np.repeat((div * (mesh.areas / 3)[:, None])[:, None, :], 3, axis=1)
    t, te = mesh.triangles, mesh.tri_edges
    return _scatter(np.repeat(t[:, :, None], 3, 2), np.repeat(te[:, None, :], 3, 1), vals,
                    (mesh.n_vertices, mesh.n_edges))


def p1_rt0_grad(mesh: TriMesh) -> sp.csr_matrix:
    """int grad phi_a . psi_j, shape (n_vertices, n_edges)."""
    g = _bary_grads(mesh)
    p = mesh.vertices[mesh.triangles]
    cen = p.mean(axis=1)
    # int psi_j = c_j |K| (centroid - p_j)
    integ = _rt0_scale(mesh)[:, :, None] * mesh.areas[:, None, None] * (cen[:, None, :] - p)
    vals = np.einsum("kad,kjd->kaj", g, integ)
    t, te = mesh.triangles, mesh.tri_edges
    return _scatter(np.repeat(t[:, :, None], 3, 2), np.repeat(te[:, None, :], 3, 1), vals,
                    (mesh.n_vertices, mesh.n_edges))


def rt0_boundary_normal(mesh: TriMesh, edge_ids) -> sp.csr_matrix:
    """int_Gamma (q.n)(r.n): boundary normals are outward and q.n equals the dof."""
    edge_ids = np.asarray(edge_ids, dtype=np.int64)
    d = np.zeros(mesh.n_edges)
    d[edge_ids] = mesh.edge_lengths[edge_ids]
    return sp.diags(d).tocsr()


# -- 1D time factors ------------------------------------------------------------

@dataclass(frozen=True)
class TimeFactors:
    mass: sp.csr_matrix        # P1 x P1, nodes 1..N
    stiffness: sp.csr_matrix   # P1' x P1'
    p0_mass: sp.csr_matrix     # P0 x P0 = diag(tau)
    deriv_p0: sp.csr_matrix    # int psi_k' chi_a, (N, N)
    p1_p0: sp.csr_matrix       # int psi_k chi_a
    mass_full: sp.csr_matrix   # P1 x P1 including node 0, (N, N+1)


def time_mass(nodes: np.ndarray) -> sp.csr_matrix:
    """P1 mass matrix on a 1D grid, all nodes included."""
    tau = np.diff(nodes)
    diag = np.zeros(len(nodes))
    diag[:-1] += tau / 3
    diag[1:] += tau / 3
    return sp.diags([tau / 6, diag, tau / 6], [-1, 0, 1]).tocsr()


def time_factors(grid: TimeGrid) -> TimeFactors:
    tau = grid.tau
    N = len(tau)
    mfull = time_mass(grid.nodes)
    kd = np.zeros(N + 1)
    kd[:-1] += 1 / tau
    kd[1:] += 1 / tau
    kfull = sp.diags([-1 / tau, kd, -1 / tau], [-1, 0, 1], shape=(N + 1, N + 1)).tocsr()
    # node j+1 rises on interval j and falls on interval j+1
    deriv = sp.diags([np.ones(N), -np.ones(N - 1)], [0, 1], shape=(N, N)).tocsr()
    p1p0 = sp.diags([tau / 2, tau[1:] / 2], [0, 1], shape=(N, N)).tocsr()
    return TimeFactors(
        mass=mfull[1:, 1:].tocsr(),
        stiffness=kfull[1:, 1:].tocsr(),
        p0_mass=sp.diags(tau).tocsr(),
        deriv_p0=deriv,
        p1_p0=p1p0,
        mass_full=mfull[1:, :].tocsr(),
    )


# -- space-time mixed system ----------------------------------------------------

@dataclass(eq=False)
class QrSystem:
    """Matrix ``A0 + epsilon * R`` of the relaxed mixed formulation.

    Unknown layout: scalar block (``scalar_space.ndof``) then flux block.
    ``matrix`` is stored in full (both triangles) CSC for the factorisation.
    """

    scalar_space: ScalarSpace
    flux_space: FluxSpace
    epsilon: float
    a0: sp.csr_matrix
    gram: sp.csr_matrix
    matrix: sp.csc_matrix
    gamma_edges: np.ndarray
    time: TimeFactors
    sigma: sp.csr_matrix      # the two lateral-boundary terms of a0

    @property
    def n_scalar(self) -> int:
        return self.scalar_space.ndof

    @property
    def ndof(self) -> int:
        return self.scalar_space.ndof + self.flux_space.ndof

    def split(self, x: np.ndarray) -> tuple[SpaceTimeScalarField, SpaceTimeFluxField]:
        return (SpaceTimeScalarField(self.scalar_space, x[:self.n_scalar]),
                SpaceTimeFluxField(self.flux_space, x[self.n_scalar:]))

    def export_matrix_market(self, path) -> None:
        scipy.io.mmwrite(str(path), sp.tril(self.matrix).tocoo(), symmetry="symmetric")


def assemble_qr_system(scalar_space: ScalarSpace, flux_space: FluxSpace, gamma_tags=None,
                       epsilon: float = 0.01) -> QrSystem:
    """Assemble the six families of terms of the relaxed mixed formulation.

    ``gamma_tags`` selects the boundary edges where Cauchy data are imposed
    (default: edges tagged GammaMeasured); it may also be an explicit edge
    index array.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    mesh = scalar_space.mesh
    if flux_space.mesh is not mesh or flux_space.grid is not scalar_space.grid:
        raise ValueError("scalar and flux spaces must share mesh and time grid")
    if gamma_tags is None:
        gamma = mesh.edges_with_tag(EdgeTag.GAMMA_MEASURED)
    elif np.asarray(gamma_tags).dtype.kind in "iu" and not isinstance(gamma_tags, EdgeTag):
        gamma = np.asarray(gamma_tags, dtype=np.int64)
    else:
        gamma = mesh.edges_with_tag(*np.atleast_1d(gamma_tags))
    if gamma.size == 0:
        warnings.warn("no measured boundary edge: system is held together by the epsilon terms only",
                      RuntimeWarning, stacklevel=2)
    tf = time_factors(scalar_space.grid)

    Mx, Kx = p1_mass(mesh), p1_stiffness(mesh)
    Bx = p1_boundary_mass(mesh, gamma)
    Fx, Dx = rt0_mass(mesh), rt0_divdiv(mesh)
    Nx = rt0_boundary_normal(mesh, gamma)
    Cd, Cg = p1_rt0_div(mesh), p1_rt0_grad(mesh)

    kron = sp.kron
    r_ss = kron(Mx, tf.stiffness) + kron(Kx, tf.mass)
    r_ff = kron(Fx + Dx, tf.p0_mass)
    s_ss = kron(Bx, tf.mass)
    s_ff = kron(Nx, tf.p0_mass)
    a_sf = -(kron(Cd, tf.deriv_p0) + kron(Cg, tf.p1_p0))
    a0 = sp.bmat([[r_ss + s_ss, a_sf], [a_sf.T, r_ff + s_ff]], format="csr")
    gram = sp.block_diag([r_ss, r_ff], format="csr")
    sigma = sp.block_diag([s_ss, s_ff], format="csr")
    matrix = (a0 + epsilon * gram).tocsc()
    matrix.eliminate_zeros()
    return QrSystem(scalar_space, flux_space, float(epsilon), a0, gram, matrix, gamma, tf, sigma)


def assemble_qr_rhs(system: QrSystem, g0: np.ndarray, g1: np.ndarray, previous=None) -> np.ndarray:
    """Right-hand side of the (iterated) relaxed formulation.

    ``g0`` has shape (n_gamma, N+1): per measured edge, the edge value of the
    temperature at every time node. ``g1`` has shape (n_gamma, N): per edge
    and time interval, the normal flux. Rows follow ``system.gamma_edges``.
    ``previous`` is an optional (scalar, flux) pair or a flat coefficient
    vector; it adds ``epsilon * R @ previous``.
    """
    mesh = system.scalar_space.mesh
    N = system.scalar_space.n_time
    gamma = system.gamma_edges
    g0 = np.asarray(g0, dtype=float)
    g1 = np.asarray(g1, dtype=float)
    if g0.shape != (len(gamma), N + 1) or g1.shape != (len(gamma), N):
        raise ValueError(f"data shapes {g0.shape}, {g1.shape} do not match "
                         f"({len(gamma)}, {N + 1}) and ({len(gamma)}, {N})")
    b = np.zeros(system.ndof)
    if len(gamma):
        # int_e phi_i ds = |e|/2 for both endpoints of a straight edge
        half = 0.5 * mesh.edge_lengths[gamma]
        tvals = (system.time.mass_full @ g0.T).T * half[:, None]  # (n_gamma, N)
        bs = np.zeros((mesh.n_vertices, N))
        np.add.at(bs, mesh.edges[gamma, 0], tvals)
        np.add.at(bs, mesh.edges[gamma, 1], tvals)
        b[:system.n_scalar] = bs.ravel()
        bf = np.zeros((mesh.n_edges, N))
        bf[gamma] = g1 * system.scalar_space.grid.tau[None, :] * mesh.edge_lengths[gamma][:, None]
        b[system.n_scalar:] = bf.ravel()
    if previous is not None:
        if isinstance(previous, tuple):
            prev = np.concatenate([previous[0].coeffs, previous[1].coeffs])
        else:
            prev = np.asarray(previous, dtype=float)
        if prev.shape != (system.ndof,):
            raise ValueError("previous iterate has the wrong dimension")
        b += system.epsilon * (system.gram @ prev)
    return b


# -- heat equation and Poisson ----------------------------------------------------

@dataclass(eq=False)
class HeatOperator:
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    dirichlet: np.ndarray   # constrained vertex ids
    free: np.ndarray


def assemble_heat_operator(mesh: TriMesh, dirichlet_tags=None) -> HeatOperator:
    """P1 mass/stiffness plus the constrained-vertex split (default: all boundary edges)."""
    if dirichlet_tags is None:
        edges = mesh.boundary_edges
    else:
        edges = mesh.edges_with_tag(*dirichlet_tags)
    fixed = mesh.vertices_on(edges)
    free = np.setdiff1d(np.arange(mesh.n_vertices), fixed)
    return HeatOperator(p1_mass(mesh), p1_stiffness(mesh), fixed, free)


@dataclass(eq=False)
class PoissonSystem:
    """Reduced P1 system ``matrix @ phi[free] = rhs`` for Laplace(phi) = f."""

    mesh: TriMesh
    matrix: sp.csc_matrix
    rhs: np.ndarray
    load: np.ndarray        # int f w over all local vertices
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    parent_vertices: np.ndarray

    def expand(self, phi_free: np.ndarray) -> np.ndarray:
        phi = np.empty(self.mesh.n_vertices)
        phi[self.free] = phi_free
        phi[self.fixed] = self.fixed_values
        return phi


def assemble_poisson(submesh: SubmeshView, f: float, boundary_values) -> PoissonSystem:
    """P1 discretisation of Laplace(phi) = f on the submesh, phi given on its boundary.

    ``boundary_values`` maps parent vertex ids to values, either as a dict or
    as a full-length parent array. Uses the weak form
    ``int grad phi . grad w = -int f w``.
    """
    if submesh.empty:
        raise EmptyRegionError("Poisson problem on an empty region")
    mesh = submesh.mesh
    pv = submesh.parent_vertices
    fixed = np.unique(mesh.edges[mesh.boundary_edges].ravel())
    free = np.setdiff1d(np.arange(mesh.n_vertices), fixed)
    if isinstance(boundary_values, dict):
        missing = [int(v) for v in pv[fixed] if int(v) not in boundary_values]
        if missing:
            raise ValueError(f"no boundary value for parent vertices {missing[:5]}")
        gvals = np.array([boundary_values[int(v)] for v in pv[fixed]], dtype=float)
    else:
        gvals = np.asarray(boundary_values, dtype=float)[pv[fixed]]
        if np.any(~np.isfinite(gvals)):
            raise ValueError("boundary values undefined on part of the front")
    K = p1_stiffness(mesh)
    load = np.zeros(mesh.n_vertices)
    np.add.at(load, mesh.triangles.ravel(), np.repeat(f * mesh.areas / 3.0, 3))
    Kc = K.tocsc()
    A = Kc[free][:, free]
    rhs = -load[free] - Kc[free][:, fixed] @ gvals
    return PoissonSystem(mesh, A.tocsc(), rhs, load, free, fixed, gvals, pv)
