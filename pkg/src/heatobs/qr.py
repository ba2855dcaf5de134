"""Iterated relaxed mixed quasi-reversibility solve on the exterior domain."""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linsolve
from .assembly import (QrSystem, assemble_qr_rhs, assemble_qr_system, p1_mass, p1_stiffness,
                       time_mass)
from .forward import CauchyData, ForwardHistory
from .geometry import point_segment_distance
from .mesh import EdgeTag, SubmeshView, TimeGrid, TriMesh
from .spaces import (SpaceTimeFluxField, SpaceTimeScalarField, build_flux_space,
                     build_scalar_space, interp_rows)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QrParams:
    epsilon: float = 0.01
    M: int = 20
    adaptive_tol: float | None = None  # stop early once the relative iterate change drops below

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.M < 0:
            raise ValueError("M must be nonnegative")


@dataclass(eq=False)
class QrSolution:
    scalar: SpaceTimeScalarField
    flux: SpaceTimeFluxField
    misfit: list[float]
    residual: list[float]
    system: QrSystem
    parent_vertices: np.ndarray  # local vertex -> vertex of the parent mesh

    @property
    def mesh(self) -> TriMesh:
        return self.scalar.space.mesh

    @property
    def iterations(self) -> int:
        return len(self.misfit) - 1

    def write_diagnostics(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["M", "misfit", "residual"])
            for m, (a, b) in enumerate(zip(self.misfit, self.residual)):
                w.writerow([m, repr(a), repr(b)])


def _local_problem(domain) -> tuple[TriMesh, np.ndarray, np.ndarray]:
    """(mesh, local->parent edge map, local->parent vertex map)."""
    if isinstance(domain, SubmeshView):
        if domain.empty:
            raise ValueError("exterior domain is empty")
        return domain.mesh, domain.edge_to_parent, domain.parent_vertices
    return domain, np.arange(domain.n_edges), np.arange(domain.n_vertices)


def _data_terms(system: QrSystem, data: CauchyData, rows: np.ndarray):
    g0, g1 = data.g0[rows], data.g1[rows]
    sub = CauchyData(data.gamma_edges[rows], data.edge_lengths[rows], data.nodes, g0, g1)
    g1_sq = float(np.sum(sub.edge_lengths[:, None] * system.scalar_space.grid.tau[None, :] * g1**2))
    return g0, g1, sub.sigma_norm(g0) ** 2 + g1_sq


def solve_qr(domain, grid: TimeGrid, data: CauchyData, params: QrParams = QrParams(),
             gamma_tags=(EdgeTag.GAMMA_MEASURED,)) -> QrSolution:
    """Factorise once, then run ``M + 1`` solves of the iterated relaxed problem.

    ``domain`` is a :class:`SubmeshView` of the inversion mesh (or that mesh
    itself); ``data`` is keyed by edges of the inversion mesh.
    """
    mesh, e2p, v2p = _local_problem(domain)
    if not np.allclose(grid.nodes, data.nodes, rtol=0, atol=1e-12 * grid.T):
        raise ValueError("data and inversion time grid differ")
    gamma = mesh.edges_with_tag(*gamma_tags)
    if gamma.size == 0:
        warnings.warn("no measured edge on the exterior domain", RuntimeWarning, stacklevel=2)
    rows = data.rows_for(e2p[gamma])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        system = assemble_qr_system(build_scalar_space(mesh, grid), build_flux_space(mesh, grid),
                                    gamma, params.epsilon)
    g0, g1, data_sq = _data_terms(system, data, rows)
    b = assemble_qr_rhs(system, g0, g1)
    fact = linsolve.factorize(system.matrix)
    pde = system.a0 - system.sigma
    x = np.zeros(system.ndof)
    misfit, residual = [], []
    for m in range(params.M + 1):
        rhs = b if m == 0 else b + system.epsilon * (system.gram @ x)
        x_new = linsolve.solve(fact, rhs)
        change = np.linalg.norm(x_new - x) / max(np.linalg.norm(x_new), 1e-300)
        x = x_new
        # |v - g0|^2 + |q.n - g1|^2 on Sigma, expanded as a quadratic in x
        misfit.append(max(float(x @ (system.sigma @ x) - 2 * (b @ x) + data_sq), 0.0))
        residual.append(float(x @ (pde @ x)))
        if params.adaptive_tol is not None and m > 0 and change < params.adaptive_tol:
            log.debug("iterated solve stopped at M=%d (change %.2e)", m, change)
            break
    scalar, flux = system.split(x)
    return QrSolution(scalar, flux, misfit, residual, system, v2p)


@dataclass
class QrErrorSummary:
    rel_l2: float
    rel_h1: float
    snapshots: dict[float, np.ndarray] = field(default_factory=dict)
    outside_reference: int = 0


def reference_on(solution: QrSolution, reference: ForwardHistory) -> tuple[np.ndarray, int]:
    """Reference temperature at the solution's vertices and time nodes.

    Vertices that fall outside the reference mesh (just outside a chord of the
    curved outer boundary, or inside the true obstacle) take the value at the
    nearest point of the reference boundary.
    """
    mesh = solution.mesh
    nodes = solution.scalar.space.grid.nodes
    rmesh = reference.mesh
    vals = np.stack([interp_rows(reference.values, reference.grid.nodes, t) for t in nodes], axis=1)
    tri, bary = rmesh.locate(mesh.vertices)
    inside = tri >= 0
    ref = np.zeros((mesh.n_vertices, len(nodes)))
    tv = rmesh.triangles[tri[inside]]
    ref[inside] = np.einsum("pi,pik->pk", bary[inside], vals[tv])
    out = np.flatnonzero(~inside)
    if out.size:
        be = rmesh.edges[rmesh.boundary_edges]
        a, b = rmesh.vertices[be[:, 0]], rmesh.vertices[be[:, 1]]
        k = point_segment_distance(mesh.vertices[out], a, b).argmin(axis=1)
        ab = b[k] - a[k]
        s = np.clip(np.einsum("pd,pd->p", mesh.vertices[out] - a[k], ab) / np.einsum("pd,pd->p", ab, ab), 0, 1)
        ref[out] = (1 - s)[:, None] * vals[be[k, 0]] + s[:, None] * vals[be[k, 1]]
    return ref, int(out.size)


def qr_error_report(solution: QrSolution, reference: ForwardHistory, times=(),
                    vertex_mask: np.ndarray | None = None, window=None) -> QrErrorSummary:
    """Relative space-time L2 and L2(H1) errors of the scalar field against a forward solve.

    ``vertex_mask`` and ``window`` restrict the error to a subregion; the
    restricted norms use lumped vertex weights.
    """
    ref, outside = reference_on(solution, reference)
    v = solution.scalar.nodal()
    err = v - ref
    mesh = solution.mesh
    nodes = solution.scalar.space.grid.nodes
    Mx, Kx = p1_mass(mesh), p1_stiffness(mesh)
    Mt = time_mass(nodes)
    if window is not None:
        keep_t = (nodes >= window[0] - 1e-12) & (nodes <= window[1] + 1e-12)
        w_t = np.asarray(Mt.sum(axis=1)).ravel() * keep_t
        Mt = sp.diags(w_t)
    if vertex_mask is not None:
        Mx = sp.diags(np.asarray(Mx.sum(axis=1)).ravel() * vertex_mask)
        Kx = None

    def norm2(A, X):
        return float(np.sum((A @ X) * (X @ Mt.T))) if A is not None else 0.0

    den_l2 = norm2(Mx, ref)
    rel_l2 = np.sqrt(norm2(Mx, err) / den_l2) if den_l2 > 0 else float(np.sqrt(norm2(Mx, err)))
    if Kx is not None:
        den_h1 = norm2(Mx, ref) + norm2(Kx, ref)
        num_h1 = norm2(Mx, err) + norm2(Kx, err)
        rel_h1 = np.sqrt(num_h1 / den_h1) if den_h1 > 0 else float(np.sqrt(num_h1))
    else:
        rel_h1 = float("nan")
    snaps = {float(t): np.abs(interp_rows(err, nodes, t)) for t in times}
    return QrErrorSummary(float(rel_l2), float(rel_h1), snaps, outside)
