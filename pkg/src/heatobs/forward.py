"""Synthetic lateral Cauchy data from a fine forward heat solve."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import linsolve
from .assembly import assemble_heat_operator, p1_boundary_mass, time_mass
from .mesh import EdgeTag, TimeGrid, TriMesh

log = logging.getLogger(__name__)


class IncompatibleDataError(ValueError):
    """Dirichlet data inconsistent with the initial condition."""


class GammaMismatchError(ValueError):
    """Measured edges of the inversion mesh are not on the forward outer boundary."""


@dataclass(frozen=True)
class DirichletDataSpec:
    """Temperature imposed on the outer boundary.

    ``kind`` is ``"g1"`` (4t(1-t), uniform), ``"g2"`` (4t(1-t)cos(theta - 4 pi t))
    or ``"custom"`` with ``func(x, y, t)``.
    """

    kind: str = "g1"
    func: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("g1", "g2", "custom"):
            raise ValueError(f"unknown Dirichlet data kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom Dirichlet data needs func(x, y, t)")

    def __call__(self, x, y, t):
        x, y, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(t, float))
        ramp = 4 * t * (1 - t)
        if self.kind == "g1":
            return ramp
        if self.kind == "g2":
            return ramp * np.cos(np.arctan2(y, x) - 4 * np.pi * t)
        return np.asarray(self.func(x, y, t), dtype=float) * np.ones_like(t)


@dataclass(eq=False)
class ForwardHistory:
    mesh: TriMesh
    grid: TimeGrid
    values: np.ndarray          # (n_vertices, N+1)
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix


def solve_forward(mesh: TriMesh, grid: TimeGrid, g_dirichlet: DirichletDataSpec | None,
                  initial: np.ndarray | None = None) -> ForwardHistory:
    """Implicit Euler for u_t = Laplace(u).

    ``g_dirichlet`` is imposed on the outer boundary (GammaMeasured and
    GammaSilent edges) and 0 on obstacle edges; ``None`` means 0 everywhere.
    """
    tau = grid.tau
    if np.any(tau <= 0):
        raise ValueError("time steps must be positive")
    op = assemble_heat_operator(mesh)
    outer = mesh.vertices_on(mesh.outer_edges)
    nV = mesh.n_vertices
    u = np.zeros((nV, grid.n_intervals + 1))
    if initial is not None:
        u[:, 0] = initial
    x, y = mesh.vertices[outer].T

    def boundary_values(t):
        vals = np.zeros(len(op.dirichlet))
        if g_dirichlet is not None and outer.size:
            gv = np.zeros(nV)
            gv[outer] = g_dirichlet(x, y, t)
            vals = gv[op.dirichlet]
        return vals

    g0 = boundary_values(grid.nodes[0])
    if initial is None and np.max(np.abs(g0), initial=0.0) > 1e-14:
        raise IncompatibleDataError("Dirichlet data nonzero at t=0 with zero initial temperature")
    u[op.dirichlet, 0] = np.where(initial is None, g0, u[op.dirichlet, 0])

    M, K = op.mass.tocsr(), op.stiffness.tocsr()
    free, fixed = op.free, op.dirichlet
    Mff, Mfd = M[free][:, free], M[free][:, fixed]
    Kff, Kfd = K[free][:, free], K[free][:, fixed]
    fact, fact_dt = None, None
    for k in range(grid.n_intervals):
        dt = tau[k]
        if fact is None or not np.isclose(dt, fact_dt, rtol=1e-12, atol=0):
            fact, fact_dt = linsolve.factorize(Mff + dt * Kff), dt
        gk = boundary_values(grid.nodes[k + 1])
        rhs = M[free] @ u[:, k] - (Mfd + dt * Kfd) @ gk
        u[free, k + 1] = linsolve.solve(fact, rhs)
        u[fixed, k + 1] = gk
    return ForwardHistory(mesh, grid, u, M, K)


@dataclass(eq=False)
class CauchyData:
    """Lateral data on the measured edges of an inversion mesh.

    ``g0[r, k]`` is the temperature on edge ``gamma_edges[r]`` at time node
    ``k``; ``g1[r, a]`` is the outward heat flux on that edge averaged over
    time interval ``a``.
    """

    gamma_edges: np.ndarray
    edge_lengths: np.ndarray
    nodes: np.ndarray
    g0: np.ndarray
    g1: np.ndarray
    delta: float = 0.0
    seed: int | None = None
    gamma_spec: str = ""

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    def rows_for(self, parent_edges: np.ndarray) -> np.ndarray:
        lookup = {int(e): r for r, e in enumerate(self.gamma_edges)}
        try:
            return np.array([lookup[int(e)] for e in parent_edges], dtype=np.int64)
        except KeyError as exc:
            raise GammaMismatchError(f"no data on edge {exc.args[0]}") from None

    def sigma_norm(self, values: np.ndarray) -> float:
        """L2(Gamma x (0,T)) norm of per-(edge, node) piecewise-linear samples."""
        full = time_mass(self.nodes)
        q = np.einsum("rk,rk->r", values, (full @ values.T).T)
        return float(np.sqrt(np.sum(self.edge_lengths * q)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# T={self.T!r} delta={self.delta!r} seed={self.seed} gamma={self.gamma_spec.replace(' ', '')}"
                     f" n_time={len(self.nodes) - 1}\n")
            w = csv.writer(fh)
            w.writerow(["kind", "edge_id", "index", "value", "edge_length"])
            for r, e in enumerate(self.gamma_edges):
                for k in range(self.g0.shape[1]):
                    w.writerow(["g0", int(e), k, repr(float(self.g0[r, k])), repr(float(self.edge_lengths[r]))])
            for r, e in enumerate(self.gamma_edges):
                for a in range(self.g1.shape[1]):
                    w.writerow(["g1", int(e), a, repr(float(self.g1[r, a])), repr(float(self.edge_lengths[r]))])

    @classmethod
    def from_csv(cls, path) -> "CauchyData":
        with open(path, newline="") as fh:
            header = fh.readline()[1:].split()
            meta = dict(item.split("=", 1) for item in header)
            rows = list(csv.DictReader(fh))
        T, n = float(meta["T"]), int(meta["n_time"])
        order = []
        for r in rows:
            e = int(r["edge_id"])
            if e not in order:
                order.append(e)
        idx = {e: i for i, e in enumerate(order)}
        g0 = np.zeros((len(order), n + 1))
        g1 = np.zeros((len(order), n))
        lengths = np.zeros(len(order))
        for r in rows:
            i = idx[int(r["edge_id"])]
            lengths[i] = float(r["edge_length"])
            target = g0 if r["kind"] == "g0" else g1
            target[i, int(r["index"])] = float(r["value"])
        seed = None if meta["seed"] == "None" else int(meta["seed"])
        return cls(np.array(order, dtype=np.int64), lengths, T * np.arange(n + 1) / n, g0, g1,
                   float(meta["delta"]), seed, meta.get("gamma", ""))


def _boundary_angle_interp(mesh: TriMesh, node_values: np.ndarray, vertex_ids: np.ndarray,
                           theta: np.ndarray) -> np.ndarray:
    """Periodic interpolation in polar angle of values given at boundary vertices."""
    ang = np.arctan2(mesh.vertices[vertex_ids, 1], mesh.vertices[vertex_ids, 0])
    order = np.argsort(ang)
    ang, vals = ang[order], node_values[order]
    ang = np.concatenate([ang[-1:] - 2 * np.pi, ang, ang[:1] + 2 * np.pi])
    vals = np.concatenate([vals[-1:], vals, vals[:1]], axis=0)
    theta = np.mod(theta - ang[1], 2 * np.pi) + ang[1]
    j = np.clip(np.searchsorted(ang, theta, side="right") - 1, 0, len(ang) - 2)
    lam = ((theta - ang[j]) / (ang[j + 1] - ang[j]))[:, None]
    return (1 - lam) * vals[j] + lam * vals[j + 1]


def boundary_flux(history: ForwardHistory) -> tuple[np.ndarray, np.ndarray]:
    """Consistent outward flux at outer-boundary vertices for every time step.

    Returns (vertex ids, flux) with flux of shape (n_vertices_outer, N): column
    ``k`` belongs to interval ``(t_k, t_{k+1}]`` of the implicit scheme.
    """
    mesh = history.mesh
    edges = mesh.outer_edges
    verts = mesh.vertices_on(edges)
    u = history.values
    du = np.diff(u, axis=1) / history.grid.tau[None, :]
    res = history.mass @ du + history.stiffness @ u[:, 1:]
    B = p1_boundary_mass(mesh, edges).tocsr()[verts][:, verts]
    fact = linsolve.factorize(B)
    flux = np.column_stack([linsolve.solve(fact, res[verts, k]) for k in range(res.shape[1])])
    return verts, flux


def _time_overlap(fine: np.ndarray, coarse: np.ndarray) -> np.ndarray:
    """W[a, k] = |(coarse_a) cap (fine_k)| / |coarse_a| for interval averaging."""
    lo = np.maximum(coarse[:-1, None], fine[None, :-1])
    hi = np.minimum(coarse[1:, None], fine[None, 1:])
    W = np.clip(hi - lo, 0, None)
    return W / np.diff(coarse)[:, None]


_GL_X, _GL_W = np.polynomial.legendre.leggauss(3)


def extract_cauchy(history: ForwardHistory, inv_mesh: TriMesh, inv_grid: TimeGrid,
                   gamma_spec: str = "") -> CauchyData:
    """Temperature and consistent flux transferred to the measured edges of ``inv_mesh``."""
    if not np.isclose(history.grid.T, inv_grid.T, rtol=1e-12):
        raise ValueError("forward and inversion time horizons differ")
    fmesh = history.mesh
    gamma = inv_mesh.edges_with_tag(EdgeTag.GAMMA_MEASURED)
    outer_f = fmesh.vertices_on(fmesh.outer_edges)
    if gamma.size:
        # every measured edge must lie on the outer boundary of the forward mesh
        mids = inv_mesh.edge_midpoints[gamma]
        rad_f = np.hypot(*fmesh.vertices[outer_f].T)
        r_at = _boundary_angle_interp(fmesh, rad_f[:, None], outer_f, np.arctan2(mids[:, 1], mids[:, 0]))[:, 0]
        gap = np.abs(np.hypot(*mids.T) - r_at)
        if gap.max() > max(inv_mesh.h, fmesh.h):
            raise GammaMismatchError(f"measured edge {int(gamma[gap.argmax()])} is off the outer boundary")
    verts, flux = boundary_flux(history)
    # gauss points on each inversion edge -> polar angle
    s = 0.5 * (_GL_X + 1)
    w = 0.5 * _GL_W
    a = inv_mesh.vertices[inv_mesh.edges[gamma, 0]]
    b = inv_mesh.vertices[inv_mesh.edges[gamma, 1]]
    pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    theta = np.arctan2(pts[..., 1], pts[..., 0]).ravel()

    trace = _boundary_angle_interp(fmesh, history.values[outer_f], outer_f, theta)
    trace = (trace.reshape(len(gamma), 3, -1) * w[None, :, None]).sum(axis=1)
    fl = _boundary_angle_interp(fmesh, flux, verts, theta)
    fl = (fl.reshape(len(gamma), 3, -1) * w[None, :, None]).sum(axis=1)

    fine = history.grid.nodes
    g0 = np.column_stack([_interp_cols(trace, fine, t) for t in inv_grid.nodes])
    g0[:, 0] = 0.0
    g1 = fl @ _time_overlap(fine, inv_grid.nodes).T
    return CauchyData(gamma, inv_mesh.edge_lengths[gamma], inv_grid.nodes.copy(), g0, g1,
                      gamma_spec=gamma_spec)


def _interp_cols(values: np.ndarray, nodes: np.ndarray, t: float) -> np.ndarray:
    i = int(np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, len(nodes) - 2))
    lam = (t - nodes[i]) / (nodes[i + 1] - nodes[i])
    return (1 - lam) * values[:, i] + lam * values[:, i + 1]


def add_noise(data: CauchyData, delta: float, seed: int) -> CauchyData:
    """Gaussian perturbation of g0 rescaled to space-time L2 norm ``delta``."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        return replace(data, g0=data.g0.copy(), g1=data.g1.copy(), delta=0.0, seed=seed)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(data.g0.shape)
    noise[:, 0] = 0.0  # keep compatibility with the zero initial state
    noise *= delta / data.sigma_norm(noise)
    return replace(data, g0=data.g0 + noise, g1=data.g1.copy(), delta=float(delta), seed=seed)
