"""Tensorised space-time finite element spaces.

``ScalarSpace`` is P1 in space times P1 in time with the t=0 coefficients
removed. ``FluxSpace`` is lowest-order Raviart-Thomas in space times P0 in
time. Both use a vertex-major (resp. edge-major) layout: all time
coefficients of one spatial degree of freedom are contiguous.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .mesh import TimeGrid, TriMesh


class OutsideDomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarSpace:
    mesh: TriMesh
    grid: TimeGrid

    @property
    def n_time(self) -> int:
        return self.grid.n_intervals

    @property
    def ndof(self) -> int:
        return self.mesh.n_vertices * self.n_time

    def index(self, vertex, k):
        """Flat index of (vertex, time node k), k >= 1."""
        k = np.asarray(k)
        if np.any(k < 1) or np.any(k > self.n_time):
            raise IndexError("time node index must be in 1..N")
        return np.asarray(vertex) * self.n_time + (k - 1)


@dataclass(frozen=True, eq=False)
class FluxSpace:
    """RT0 x P0. Degree of freedom (e, a) is the flux through edge ``e`` along
    ``mesh.edge_normals[e]`` on time interval ``a`` (0-based)."""

    mesh: TriMesh
    grid: TimeGrid

    @property
    def n_time(self) -> int:
        return self.grid.n_intervals

    @property
    def ndof(self) -> int:
        return self.mesh.n_edges * self.n_time

    def index(self, edge, a):
        return np.asarray(edge) * self.n_time + np.asarray(a)


def build_scalar_space(mesh: TriMesh, grid: TimeGrid) -> ScalarSpace:
    return ScalarSpace(mesh, grid)


def build_flux_space(mesh: TriMesh, grid: TimeGrid) -> FluxSpace:
    return FluxSpace(mesh, grid)


@dataclass(eq=False)
class SpaceTimeScalarField:
    space: ScalarSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.ndof,):
            raise ValueError(f"expected {self.space.ndof} coefficients, got {self.coeffs.shape}")

    @classmethod
    def zeros(cls, space: ScalarSpace) -> "SpaceTimeScalarField":
        return cls(space, np.zeros(space.ndof))

    @classmethod
    def interpolate(cls, space: ScalarSpace, func) -> "SpaceTimeScalarField":
        """Nodal interpolant of ``func(x, y, t)``; values at t=0 are dropped."""
        x, y = space.mesh.vertices.T
        t = space.grid.nodes[1:]
        vals = func(x[:, None], y[:, None], t[None, :])
        return cls(space, np.broadcast_to(vals, (space.mesh.n_vertices, space.n_time)).ravel())

    def nodal(self) -> np.ndarray:
        """(n_vertices, N+1) array of nodal values including the zero t=0 column."""
        n = self.space.mesh.n_vertices
        out = np.zeros((n, self.space.n_time + 1))
        out[:, 1:] = self.coeffs.reshape(n, self.space.n_time)
        return out

    def at_time(self, t: float) -> np.ndarray:
        """Nodal values at time ``t`` (linear interpolation between time nodes)."""
        return interp_rows(self.nodal(), self.space.grid.nodes, t)

    def evaluate(self, point, t: float) -> float:
        return evaluate_scalar(self, point, t)


@dataclass(eq=False)
class SpaceTimeFluxField:
    space: FluxSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.ndof,):
            raise ValueError(f"expected {self.space.ndof} coefficients, got {self.coeffs.shape}")

    @classmethod
    def zeros(cls, space: FluxSpace) -> "SpaceTimeFluxField":
        return cls(space, np.zeros(space.ndof))

    def edge_values(self) -> np.ndarray:
        return self.coeffs.reshape(self.space.mesh.n_edges, self.space.n_time)

    def evaluate(self, point, a: int) -> np.ndarray:
        """Vector value at ``point`` on time interval ``a``."""
        mesh = self.space.mesh
        tri, _ = mesh.locate(np.asarray(point, dtype=float)[None])
        k = int(tri[0])
        if k < 0:
            raise OutsideDomainError(f"point {point} outside the mesh")
        vals = self.edge_values()[mesh.tri_edges[k], a]
        return rt0_basis(mesh, k, np.asarray(point, dtype=float)[None])[0] @ vals


def rt0_basis(mesh: TriMesh, k: int, pts: np.ndarray) -> np.ndarray:
    """Values of the three global RT0 basis functions of triangle ``k``.

    Returns shape (n_pts, 2, 3): column ``i`` is the basis of local edge ``i``
    (opposite local vertex ``i``), oriented by the global edge normal.
    """
    p = mesh.vertices[mesh.triangles[k]]
    lens = mesh.edge_lengths[mesh.tri_edges[k]]
    scale = mesh.edge_sign[k] * lens / (2 * mesh.areas[k])
    return (pts[:, :, None] - p.T[None, :, :]) * scale[None, None, :]


def interp_rows(values: np.ndarray, nodes: np.ndarray, t: float) -> np.ndarray:
    """Linear interpolation in time of every row of ``values`` at ``t``."""
    i = int(np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, len(nodes) - 2))
    w = (t - nodes[i]) / (nodes[i + 1] - nodes[i])
    return (1 - w) * values[:, i] + w * values[:, i + 1]


def evaluate_scalar(field: SpaceTimeScalarField, point, t: float) -> float:
    """P1-in-space, linear-in-time evaluation at a single point."""
    space = field.space
    grid = space.grid
    if t < 0 or t > grid.T * (1 + 1e-12):
        raise ValueError(f"time {t} outside [0, T]")
    tri, bary = space.mesh.locate(np.asarray(point, dtype=float)[None])
    if tri[0] < 0:
        raise OutsideDomainError(f"point {point} outside the mesh")
    verts = space.mesh.triangles[tri[0]]
    nodal = field.coeffs.reshape(space.mesh.n_vertices, space.n_time)[verts]
    traj = np.concatenate([np.zeros((3, 1)), nodal], axis=1)
    vals = interp_rows(traj, grid.nodes, t)
    return float(bary[0] @ vals)


def time_l2_norms(values: np.ndarray, nodes: np.ndarray, window: tuple[float, float]) -> np.ndarray:
    """Exact L2(window) norms of piecewise-linear trajectories.

    ``values`` has shape (n, len(nodes)); each row is a continuous piecewise
    linear function of time with the given node values.
    """
    ta, tb = window
    if not (nodes[0] <= ta < tb <= nodes[-1] * (1 + 1e-14)):
        raise ValueError(f"window {window} not inside [{nodes[0]}, {nodes[-1]}]")
    values = np.atleast_2d(values)
    total = np.zeros(len(values))
    for i in range(len(nodes) - 1):
        s0, s1 = max(nodes[i], ta), min(nodes[i + 1], tb)
        if s1 <= s0:
            continue
        w = (np.array([s0, s1]) - nodes[i]) / (nodes[i + 1] - nodes[i])
        y0 = values[:, i] + w[0] * (values[:, i + 1] - values[:, i])
        y1 = values[:, i] + w[1] * (values[:, i + 1] - values[:, i])
        total += (s1 - s0) * (y0 * y0 + y0 * y1 + y1 * y1) / 3.0
    return np.sqrt(total)


def node_time_l2(field: SpaceTimeScalarField, vertex: int, window: tuple[float, float]) -> float:
    return float(time_l2_norms(field.nodal()[vertex][None], field.space.grid.nodes, window)[0])


# -- export -----------------------------------------------------------------

def write_vtk(path, mesh: TriMesh, point_data: dict[str, np.ndarray], title: str = "heatobs") -> None:
    """Legacy ASCII VTK unstructured grid with scalar point data."""
    with open(path, "w") as fh:
        fh.write(f"# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_vertices} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r} 0.0\n")
        fh.write(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"3 {i} {j} {k}\n")
        fh.write(f"CELL_TYPES {mesh.n_triangles}\n")
        fh.write("5\n" * mesh.n_triangles)
        if point_data:
            fh.write(f"POINT_DATA {mesh.n_vertices}\n")
            for name, vals in point_data.items():
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                fh.write("\n".join(repr(float(v)) for v in vals))
                fh.write("\n")


def write_field_vtk(path, field: SpaceTimeScalarField, time_nodes=None) -> None:
    nodal = field.nodal()
    ks = range(nodal.shape[1]) if time_nodes is None else time_nodes
    write_vtk(path, field.space.mesh, {f"t{k:04d}": nodal[:, k] for k in ks})


def write_field_csv(path, field: SpaceTimeScalarField) -> None:
    """Rows ``vertex, t_k, value`` for every vertex and time node."""
    nodal = field.nodal()
    nodes = field.space.grid.nodes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "t", "value"])
        for v in range(nodal.shape[0]):
            for k, t in enumerate(nodes):
                w.writerow([v, repr(float(t)), repr(float(nodal[v, k]))])
