"""Triangulations of polygonal domains, boundary tagging and time grids."""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import triangle

from .geometry import Polygon, points_in_polygon

log = logging.getLogger(__name__)


class MeshingError(RuntimeError):
    """Raised when a triangulation cannot meet its quality constraints."""


class EdgeTag(enum.IntEnum):
    INTERIOR = 0
    GAMMA_MEASURED = 1
    GAMMA_SILENT = 2
    OBSTACLE_FRONT = 3


TAG_NAMES = {
    EdgeTag.INTERIOR: "Interior",
    EdgeTag.GAMMA_MEASURED: "GammaMeasured",
    EdgeTag.GAMMA_SILENT: "GammaSilent",
    EdgeTag.OBSTACLE_FRONT: "ObstacleFront",
}
_TAG_BY_NAME = {v: k for k, v in TAG_NAMES.items()}


def _build_edges(triangles: np.ndarray, n_vertices: int):
    """Unique edges, edge->triangle adjacency and triangle->edge map.

    Local edge ``i`` of a triangle is the one opposite its local vertex ``i``.
    """
    tri = triangles
    local = np.stack([tri[:, [1, 2]], tri[:, [2, 0]], tri[:, [0, 1]]], axis=1)  # (nT, 3, 2)
    flat = np.sort(local.reshape(-1, 2), axis=1)
    keys = flat[:, 0].astype(np.int64) * n_vertices + flat[:, 1]
    uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    edges = flat[first]
    tri_edges = inverse.reshape(-1, 3)
    counts = np.bincount(inverse, minlength=len(edges))
    if np.any(counts > 2):
        bad = edges[np.argmax(counts)]
        raise MeshingError(f"edge {bad.tolist()} shared by more than two triangles")
    owner = np.repeat(np.arange(len(tri)), 3)
    order = np.lexsort((owner, inverse))
    e_sorted, o_sorted = inverse[order], owner[order]
    is_first = np.ones(len(order), dtype=bool)
    is_first[1:] = e_sorted[1:] != e_sorted[:-1]
    # column 0 holds the lower-indexed neighbour
    edge_tris = np.full((len(edges), 2), -1, dtype=np.int64)
    edge_tris[e_sorted[is_first], 0] = o_sorted[is_first]
    edge_tris[e_sorted[~is_first], 1] = o_sorted[~is_first]
    return edges, edge_tris, tri_edges


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Conforming triangulation with tagged boundary edges.

    Edge normals point out of the boundary on boundary edges and out of the
    lower-indexed neighbour on interior edges. ``edge_sign[k, i]`` is +1 when
    that normal is outward for triangle ``k`` across its local edge ``i``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edge_tags: np.ndarray | None = None
    n_holes: int = 0
    edges: np.ndarray = field(init=False)
    edge_tris: np.ndarray = field(init=False)
    tri_edges: np.ndarray = field(init=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        d1 = v[t[:, 1]] - v[t[:, 0]]
        d2 = v[t[:, 2]] - v[t[:, 0]]
        neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
        if np.any(neg):
            t = t.copy()
            t[neg] = t[neg][:, [0, 2, 1]]
        edges, edge_tris, tri_edges = _build_edges(t, len(v))
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "edge_tris", edge_tris)
        object.__setattr__(self, "tri_edges", tri_edges)
        bnd = edge_tris[:, 1] < 0
        if self.edge_tags is None:
            tags = np.where(bnd, EdgeTag.GAMMA_MEASURED, EdgeTag.INTERIOR).astype(np.int8)
        else:
            tags = np.asarray(self.edge_tags, dtype=np.int8).copy()
            if tags.shape != (len(edges),):
                raise ValueError("edge_tags length mismatch")
            if np.any((tags == EdgeTag.INTERIOR) == bnd):
                raise ValueError("tags must mark exactly the boundary edges")
        tags.setflags(write=False)
        object.__setattr__(self, "edge_tags", tags)

    # sizes -----------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    # geometry --------------------------------------------------------------
    @cached_property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]], axis=1)

    @cached_property
    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def edge_sign(self) -> np.ndarray:
        owner = self.edge_tris[self.tri_edges, 0]
        return np.where(owner == np.arange(self.n_triangles)[:, None], 1.0, -1.0)

    @cached_property
    def edge_normals(self) -> np.ndarray:
        a = self.vertices[self.edges[:, 0]]
        b = self.vertices[self.edges[:, 1]]
        t = (b - a) / self.edge_lengths[:, None]
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        # flip so it points away from the owning (lower-indexed) triangle
        away = np.einsum("ij,ij->i", n, self.edge_midpoints - self.centroids[self.edge_tris[:, 0]])
        return np.where(away[:, None] < 0, -n, n)

    def diameters(self) -> np.ndarray:
        return self.edge_lengths[self.tri_edges].max(axis=1)

    def min_angles(self) -> np.ndarray:
        lens = self.edge_lengths[self.tri_edges]  # side i opposite vertex i
        a, b, c = lens.T
        cosines = np.stack([(b**2 + c**2 - a**2) / (2 * b * c),
                            (a**2 + c**2 - b**2) / (2 * a * c),
                            (a**2 + b**2 - c**2) / (2 * a * b)], axis=1)
        return np.degrees(np.arccos(np.clip(cosines, -1, 1))).min(axis=1)

    @property
    def h(self) -> float:
        return float(self.diameters().max())

    # boundary --------------------------------------------------------------
    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tags != EdgeTag.INTERIOR)

    def edges_with_tag(self, *tags) -> np.ndarray:
        return np.flatnonzero(np.isin(self.edge_tags, [int(t) for t in tags]))

    @cached_property
    def outer_edges(self) -> np.ndarray:
        return self.edges_with_tag(EdgeTag.GAMMA_MEASURED, EdgeTag.GAMMA_SILENT)

    def vertices_on(self, edge_ids) -> np.ndarray:
        return np.unique(self.edges[np.asarray(edge_ids, dtype=np.int64)].ravel())

    def with_tags(self, tags: np.ndarray) -> "TriMesh":
        return TriMesh(self.vertices, self.triangles, tags, self.n_holes)

    def boundary_loops(self) -> list[np.ndarray]:
        """Closed vertex loops of the boundary, interior on the left."""
        return chain_loops(self, np.arange(self.n_triangles))

    def locate(self, pts: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
        """Containing triangle (or -1) and barycentric coordinates for each point."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        tri = np.full(len(pts), -1, dtype=np.int64)
        bary = np.zeros((len(pts), 3))
        for lo in range(0, len(pts), 256):
            q = pts[lo:lo + 256, None, :] - p[None, :, 0, :]
            l1 = (q[..., 0] * d2[:, 1] - q[..., 1] * d2[:, 0]) / det
            l2 = (d1[:, 0] * q[..., 1] - d1[:, 1] * q[..., 0]) / det
            l0 = 1 - l1 - l2
            worst = np.minimum(np.minimum(l0, l1), l2)
            k = np.argmax(worst, axis=1)
            rows = np.arange(len(k))
            ok = worst[rows, k] >= -tol
            tri[lo:lo + 256] = np.where(ok, k, -1)
            bary[lo:lo + 256] = np.stack([l0[rows, k], l1[rows, k], l2[rows, k]], axis=1)
        return tri, bary

    # io ----------------------------------------------------------------------
    def write(self, path) -> None:
        bnd = self.boundary_edges
        with open(path, "w") as fh:
            fh.write(f"vertices {self.n_vertices} / triangles {self.n_triangles} / edges {len(bnd)}\n")
            for x, y in self.vertices:
                fh.write(f"{float(x)!r} {float(y)!r}\n")
            for i, j, k in self.triangles:
                fh.write(f"{i} {j} {k}\n")
            for e in bnd:
                i, j = self.edges[e]
                fh.write(f"{i} {j} {TAG_NAMES[EdgeTag(self.edge_tags[e])]}\n")

    @classmethod
    def read(cls, path) -> "TriMesh":
        with open(path) as fh:
            header = fh.readline().split()
            nv, nt, nb = int(header[1]), int(header[4]), int(header[7])
            verts = np.array([[float(x) for x in fh.readline().split()] for _ in range(nv)])
            tris = np.array([[int(x) for x in fh.readline().split()] for _ in range(nt)], dtype=np.int64)
            brows = [fh.readline().split() for _ in range(nb)]
        mesh = cls(verts, tris)
        tags = np.zeros(mesh.n_edges, dtype=np.int8)
        lookup = {(int(i), int(j)): e for e, (i, j) in enumerate(mesh.edges)}
        for i, j, name in brows:
            a, b = sorted((int(i), int(j)))
            tags[lookup[(a, b)]] = _TAG_BY_NAME[name]
        n_loops = len(mesh.boundary_loops())
        return TriMesh(verts, tris, tags, n_holes=n_loops - 1)


def chain_loops(mesh: TriMesh, tri_ids: np.ndarray) -> list[np.ndarray]:
    """Boundary of a triangle subset as closed vertex loops (subset on the left).

    At pinch vertices the walk turns into the sector of the triangle it came
    from, so loops touching at a vertex come out as separate loops.
    """
    tri_ids = np.asarray(tri_ids, dtype=np.int64)
    if tri_ids.size == 0:
        return []
    inside = np.zeros(mesh.n_triangles, dtype=bool)
    inside[tri_ids] = True
    t = mesh.triangles[tri_ids]
    half = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    eids = np.concatenate([mesh.tri_edges[tri_ids, 2], mesh.tri_edges[tri_ids, 0], mesh.tri_edges[tri_ids, 1]])
    et = mesh.edge_tris[eids]
    other = np.where(et[:, 0] == np.concatenate([tri_ids] * 3), et[:, 1], et[:, 0])
    on_bnd = (other < 0) | ~inside[np.maximum(other, 0)]
    half = half[on_bnd]
    outgoing: dict[int, list[int]] = {}
    for k, (a, _) in enumerate(half):
        outgoing.setdefault(int(a), []).append(k)
    used = np.zeros(len(half), dtype=bool)
    P = mesh.vertices
    loops = []
    for start in range(len(half)):
        if used[start]:
            continue
        loop = []
        k = start
        while not used[k]:
            used[k] = True
            a, b = half[k]
            loop.append(int(a))
            cands = [c for c in outgoing[int(b)] if not used[c]]
            if not cands:
                break
            if len(cands) > 1:
                back = P[a] - P[b]
                ang0 = np.arctan2(back[1], back[0])

                def cw_angle(c):
                    d = P[half[c][1]] - P[b]
                    return (ang0 - np.arctan2(d[1], d[0])) % (2 * np.pi)

                cands.sort(key=cw_angle)
            k = cands[0]
        loops.append(np.array(loop, dtype=np.int64))
    return loops


def _hole_point(poly: Polygon) -> np.ndarray:
    c = poly.vertices.mean(axis=0)
    if points_in_polygon(poly, c[None], tol=-1.0)[0]:
        return c
    # fall back to the centroid of an ear-ish triangle near vertex 0
    v = poly.vertices
    for i in range(len(v)):
        cand = (v[i - 1] + v[i] + v[(i + 1) % len(v)]) / 3
        if points_in_polygon(poly, cand[None], tol=-1.0)[0]:
            return cand
    raise MeshingError("could not find a point inside hole polygon")


def _split_long(poly: Polygon, max_len: float) -> np.ndarray:
    out = []
    a, b = poly.segments()
    for p, q in zip(a, b):
        n = int(np.ceil(np.linalg.norm(q - p) / max_len))
        for s in range(max(n, 1)):
            out.append(p + (q - p) * s / max(n, 1))
    return np.array(out)


MAX_SEGMENT_SPLITS = 4


def _refine(rings, hole_pts, area, target_h, min_angle):
    """Triangle with boundary segments kept intact, then diameter-driven local refinement."""
    segs, start = [], 0
    for v in rings:
        n = len(v)
        segs.append(np.stack([start + np.arange(n), start + (np.arange(n) + 1) % n], axis=1))
        start += n
    data = {"vertices": np.concatenate(rings), "segments": np.concatenate(segs)}
    if hole_pts is not None:
        data["holes"] = hole_pts
    out = triangle.triangulate(data, f"pq{min_angle:.6g}a{area:.12g}YQ")
    verts, tris = out["vertices"], out["triangles"]
    for _ in range(12):
        mesh = TriMesh(verts, tris)
        big = mesh.diameters() > 1.5 * target_h
        if not big.any():
            break
        areas = np.where(big, 0.5 * mesh.areas, -1.0)
        out = triangle.triangulate({"vertices": verts, "triangles": tris, "segments": out["segments"],
                                    "triangle_max_area": areas}, f"rpq{min_angle:.6g}YQ")
        verts, tris = out["vertices"], out["triangles"]
    return verts, tris


def _split_segments_near(rings, mesh: TriMesh, bad: np.ndarray):
    """Insert midpoints into the input segments that are edges of the ``bad`` triangles."""
    offsets = np.cumsum([0] + [len(v) for v in rings])
    n_input = offsets[-1]
    marked = [set() for _ in rings]
    for k in bad:
        t = mesh.triangles[k]
        for i in range(3):
            a, b = sorted((int(t[i]), int(t[(i + 1) % 3])))
            if b >= n_input:
                continue
            r = int(np.searchsorted(offsets, a, side="right") - 1)
            n = len(rings[r])
            la, lb = a - offsets[r], b - offsets[r]
            if lb == la + 1:
                marked[r].add(la)
            elif la == 0 and lb == n - 1:
                marked[r].add(n - 1)
    if not any(marked):
        return rings, False
    out = []
    for v, m in zip(rings, marked):
        pieces = []
        for j in range(len(v)):
            pieces.append(v[j])
            if j in m:
                pieces.append(0.5 * (v[j] + v[(j + 1) % len(v)]))
        out.append(np.array(pieces))
    return out, True


MAX_ANGLE_FLOOR = 33.8


def triangulate(outer: Polygon, holes: Sequence[Polygon] = (), target_h: float = 0.1,
                min_angle: float = 20.0, seed: int = 0) -> TriMesh:
    """Quality triangulation of ``outer`` minus ``holes``.

    Input polygon edges are kept as mesh edges (edges longer than
    ``1.5 * target_h`` are split into pieces of at most ``target_h`` first,
    and segments next to triangles below the angle floor are halved and the
    mesh regenerated, at most MAX_SEGMENT_SPLITS times). Outer edges are tagged
    GammaMeasured, hole edges ObstacleFront. ``seed`` perturbs the area
    bound by a few percent, so equal seeds give bitwise identical meshes and
    different seeds give different interiors.
    """
    if target_h <= 0:
        raise ValueError("target_h must be positive")
    if not 0 <= min_angle <= MAX_ANGLE_FLOOR:
        raise MeshingError(f"minimum angle floor {min_angle} deg is not reachable "
                           f"(Delaunay refinement terminates only up to {MAX_ANGLE_FLOOR} deg)")
    loops = [outer.ccw()] + [h.ccw() for h in holes]
    for p in loops:
        if p.area <= 0 or not p.is_simple():
            raise MeshingError("degenerate or self-intersecting input polygon")
    rings = [_split_long(p, target_h) if p.max_edge() > 1.5 * target_h else p.vertices for p in loops]
    hole_pts = np.array([_hole_point(h) for h in loops[1:]]) if holes else None
    rng = np.random.default_rng(seed)
    area = np.sqrt(3) / 4 * target_h**2 * (1.0 - 0.05 * rng.random())
    for _ in range(MAX_SEGMENT_SPLITS + 1):
        verts, tris = _refine(rings, hole_pts, area, target_h, min_angle)
        mesh = TriMesh(verts, tris)
        bad = np.flatnonzero(mesh.min_angles() < min_angle - 1e-6)
        if bad.size == 0:
            break
        # boundary segments cannot take Steiner points; halve the ones next to bad triangles
        rings, split = _split_segments_near(rings, mesh, bad)
        if not split:
            break
    if mesh.diameters().max() > 1.5 * target_h + 1e-12:
        raise MeshingError(f"diameter bound not met: {mesh.diameters().max():.4g} > {1.5 * target_h:.4g}")
    worst = mesh.min_angles().min()
    if worst < min_angle - 1e-6:
        raise MeshingError(f"minimum angle {worst:.3f} deg below floor {min_angle} deg "
                           f"({np.count_nonzero(mesh.min_angles() < min_angle)} triangles)")
    # tag boundary edges: hole edges are those whose midpoint lies on a hole
    tags = np.where(mesh.edge_tris[:, 1] < 0, EdgeTag.GAMMA_MEASURED, EdgeTag.INTERIOR).astype(np.int8)
    bnd = mesh.boundary_edges
    if holes:
        mid = mesh.edge_midpoints[bnd]
        from .geometry import point_segment_distance
        oa, ob = loops[0].segments()
        d_outer = point_segment_distance(mid, oa, ob).min(axis=1)
        tags[bnd[d_outer > 1e-9]] = EdgeTag.OBSTACLE_FRONT
    return TriMesh(verts, tris, tags, n_holes=len(holes))


def tag_gamma(mesh: TriMesh, theta_ranges: Sequence[tuple[float, float]] = ()) -> TriMesh:
    """Retag outer boundary edges by the polar angle of their midpoints.

    An empty range list marks the whole outer boundary as measured.
    """
    tags = mesh.edge_tags.copy()
    outer = mesh.outer_edges
    if not theta_ranges:
        tags[outer] = EdgeTag.GAMMA_MEASURED
        return mesh.with_tags(tags)
    mid = mesh.edge_midpoints[outer]
    theta = np.mod(np.arctan2(mid[:, 1], mid[:, 0]), 2 * np.pi)
    hit = np.zeros(len(outer), dtype=bool)
    for lo, hi in theta_ranges:
        hit |= (theta > lo) & (theta < hi)
    tags[outer] = np.where(hit, EdgeTag.GAMMA_MEASURED, EdgeTag.GAMMA_SILENT)
    if not hit.any():
        warnings.warn("no outer boundary edge falls in the measured angle ranges", RuntimeWarning, stacklevel=2)
    return mesh.with_tags(tags)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    T: float
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0) or not np.isclose(nodes[-1], self.T):
            raise ValueError("time nodes must increase strictly from 0 to T")
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_intervals(self) -> int:
        return len(self.nodes) - 1

    @property
    def tau(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def dt(self) -> float:
        return float(self.tau.max())


def make_time_grid(T: float, n_intervals: int) -> TimeGrid:
    if T <= 0 or n_intervals < 1:
        raise ValueError("need T > 0 and n_intervals >= 1")
    nodes = T * np.arange(n_intervals + 1) / n_intervals
    nodes[-1] = T
    return TimeGrid(float(T), nodes)


@dataclass(frozen=True, eq=False)
class SubmeshView:
    """A subset of a parent mesh's triangles."""

    parent: TriMesh
    tri_ids: np.ndarray

    @property
    def empty(self) -> bool:
        return self.tri_ids.size == 0

    @cached_property
    def parent_vertices(self) -> np.ndarray:
        return np.unique(self.parent.triangles[self.tri_ids].ravel())

    @cached_property
    def vertex_map(self) -> np.ndarray:
        """Parent vertex -> local vertex index, -1 when absent."""
        m = np.full(self.parent.n_vertices, -1, dtype=np.int64)
        m[self.parent_vertices] = np.arange(len(self.parent_vertices))
        return m

    @cached_property
    def boundary_loops(self) -> list[np.ndarray]:
        """Induced boundary as closed loops of parent vertex indices."""
        return chain_loops(self.parent, self.tri_ids)

    @cached_property
    def interface_edges(self) -> np.ndarray:
        """Parent edges separating kept triangles from other parent triangles."""
        keep = np.zeros(self.parent.n_triangles, dtype=bool)
        keep[self.tri_ids] = True
        et = self.parent.edge_tris
        interior = et[:, 1] >= 0
        a = keep[et[:, 0]]
        b = keep[np.maximum(et[:, 1], 0)]
        return np.flatnonzero(interior & (a != b))

    @cached_property
    def boundary_parent_vertices(self) -> np.ndarray:
        if self.empty:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(self.boundary_loops))

    @cached_property
    def mesh(self) -> TriMesh:
        """Standalone mesh of the kept triangles; interface edges become ObstacleFront."""
        if self.empty:
            raise ValueError("empty submesh")
        tris = self.vertex_map[self.parent.triangles[self.tri_ids]]
        verts = self.parent.vertices[self.parent_vertices]
        local = TriMesh(verts, tris)
        # inherit boundary tags from the parent where the edge was already a boundary
        pv = self.parent_vertices
        pe = {tuple(e): k for k, e in enumerate(self.parent.edges)}
        tags = np.zeros(local.n_edges, dtype=np.int8)
        for k in local.boundary_edges:
            i, j = pv[local.edges[k]]
            parent_tag = self.parent.edge_tags[pe[(min(i, j), max(i, j))]]
            tags[k] = parent_tag if parent_tag != EdgeTag.INTERIOR else EdgeTag.OBSTACLE_FRONT
        n_loops = len(self.boundary_loops)
        return TriMesh(verts, tris, tags, n_holes=max(n_loops - 1, 0))

    @cached_property
    def edge_to_parent(self) -> np.ndarray:
        """Local edge index of :attr:`mesh` -> parent edge index."""
        pv = self.parent_vertices
        loc = self.mesh.edges
        a, b = pv[loc[:, 0]], pv[loc[:, 1]]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        pe = self.parent.edges
        key_p = pe[:, 0].astype(np.int64) * self.parent.n_vertices + pe[:, 1]
        order = np.argsort(key_p)
        pos = np.searchsorted(key_p[order], lo * self.parent.n_vertices + hi)
        return order[pos]

    def front_polygons(self) -> list[Polygon]:
        out = []
        for loop in self.boundary_loops:
            if len(loop) >= 3:
                out.append(Polygon(self.parent.vertices[loop]))
        return out


def extract_submesh(mesh: TriMesh, nodal_sign: np.ndarray, keep: str = "negative-region",
                    within: np.ndarray | None = None) -> SubmeshView:
    """Split the triangles of ``within`` (default: all) by a nodal field.

    A triangle belongs to the negative region when the mean of its three
    vertex values is negative, i.e. when the P1 field is negative at its
    centroid. ``keep="nonnegative-region"`` returns the complement inside
    ``within``. An empty result is returned as an empty view.
    """
    if keep not in ("negative-region", "nonnegative-region"):
        raise ValueError(f"unknown region {keep!r}")
    nodal_sign = np.asarray(nodal_sign, dtype=float)
    if nodal_sign.shape != (mesh.n_vertices,):
        raise ValueError("nodal_sign must have one value per parent vertex")
    cand = np.arange(mesh.n_triangles) if within is None else np.asarray(within, dtype=np.int64)
    vals = nodal_sign[mesh.triangles[cand]]
    if np.any(~np.isfinite(vals)):
        raise ValueError("nodal_sign undefined on part of the region")
    neg = vals.mean(axis=1) < 0
    chosen = cand[neg] if keep == "negative-region" else cand[~neg]
    if chosen.size == 0:
        log.info("extract_submesh: %s is empty", keep)
    return SubmeshView(mesh, np.sort(chosen))
