"""Poisson level-set update that shrinks the obstacle estimate."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import linsolve
from .assembly import EmptyRegionError, assemble_poisson
from .geometry import Polygon
from .mesh import SubmeshView, TriMesh, extract_submesh
from .qr import QrSolution
from .spaces import time_l2_norms

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LevelSetParams:
    f: float
    window: tuple[float, float] | None = None  # None: (0, T/2)


@dataclass(eq=False)
class ObstacleState:
    """Current obstacle as a set of triangles of the fixed inversion mesh."""

    view: SubmeshView
    n: int = 0
    phi: np.ndarray | None = None  # parent-sized, nan off the previous obstacle
    fronts: list[Polygon] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return self.view.empty

    @property
    def mesh(self) -> TriMesh:
        return self.view.parent

    def exterior(self) -> SubmeshView:
        keep = np.setdiff1d(np.arange(self.mesh.n_triangles), self.view.tri_ids)
        return SubmeshView(self.mesh, keep)


def initial_state(mesh: TriMesh, center, radius: float) -> ObstacleState:
    """Triangles whose centroid lies in the disk ``|x - center| < radius``."""
    d = np.hypot(*(mesh.vertices - np.asarray(center, float)).T) - radius
    view = extract_submesh(mesh, d)
    return ObstacleState(view, 0, None, view.front_polygons())


def compute_velocity(solution: QrSolution, window: tuple[float, float] | None = None,
                     n_parent: int | None = None) -> np.ndarray:
    """Time L2 norm of the temperature at every vertex of the exterior domain.

    Returns a parent-sized array (nan off the domain) when ``n_parent`` is
    given, otherwise one value per local vertex.
    """
    grid = solution.scalar.space.grid
    if window is None:
        window = (0.0, grid.T / 2)
    V = time_l2_norms(solution.scalar.nodal(), grid.nodes, window)
    if n_parent is None:
        return V
    out = np.full(n_parent, np.nan)
    out[solution.parent_vertices] = V
    return out


def front_polygon(state: ObstacleState) -> list[Polygon]:
    if state.empty:
        return []
    return state.view.front_polygons()


def solve_level_set(state: ObstacleState, velocity: np.ndarray, f: float) -> np.ndarray:
    """phi on the parent mesh (nan off the obstacle) with Laplace(phi) = f, phi = velocity on the front."""
    pois = assemble_poisson(state.view, f, velocity)
    phi_local = pois.expand(linsolve.solve(linsolve.factorize(pois.matrix), pois.rhs)
                            if pois.free.size else np.zeros(0))
    phi = np.full(state.mesh.n_vertices, np.nan)
    phi[pois.parent_vertices] = phi_local
    return phi


def update_obstacle(state: ObstacleState, velocity: np.ndarray, params: LevelSetParams) -> ObstacleState:
    """Next obstacle: triangles of the current one where phi is negative.

    ``velocity`` is parent-sized and must be finite on the current front.
    The new triangle set is a subset of the old by construction.
    """
    if state.empty:
        raise EmptyRegionError("obstacle is already empty")
    phi = solve_level_set(state, velocity, params.f)
    view = extract_submesh(state.mesh, phi, "negative-region", within=state.view.tri_ids)
    return ObstacleState(view, state.n + 1, phi, view.front_polygons() if not view.empty else [])
