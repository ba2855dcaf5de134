"""Boundary curves, polygons and curve-to-curve distances."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar


class InvalidCurveError(ValueError):
    """Raised when a curve produces a non-positive radius sample."""


@dataclass(frozen=True)
class PolarCurve:
    """Closed curve given in polar form.

    ``kind`` is one of ``"trig-polar"``, ``"circle"`` or ``"disk-union"``.
    A trig-polar curve has radius
    ``base + sum(a_k cos(k t) + b_k sin(k t))`` around the origin; the
    harmonics are stored as ``(k, a_k, b_k)`` triples.
    """

    kind: str
    base: float = 0.0
    harmonics: tuple[tuple[int, float, float], ...] = ()
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    circles: tuple["PolarCurve", ...] = ()

    @classmethod
    def trig(cls, base: float, harmonics: Sequence[tuple[int, float, float]] = ()) -> "PolarCurve":
        return cls("trig-polar", base=float(base),
                   harmonics=tuple((int(k), float(a), float(b)) for k, a, b in harmonics))

    @classmethod
    def circle(cls, center: Sequence[float], radius: float) -> "PolarCurve":
        return cls("circle", center=(float(center[0]), float(center[1])), radius=float(radius))

    @classmethod
    def disk_union(cls, circles: Sequence["PolarCurve"]) -> "PolarCurve":
        for c in circles:
            if c.kind != "circle":
                raise InvalidCurveError("disk-union components must be circles")
        return cls("disk-union", circles=tuple(circles))

    def components(self) -> tuple["PolarCurve", ...]:
        return self.circles if self.kind == "disk-union" else (self,)

    def radius_at(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.kind == "circle":
            return np.full_like(theta, self.radius)
        if self.kind == "trig-polar":
            r = np.full_like(theta, self.base)
            for k, a, b in self.harmonics:
                r = r + a * np.cos(k * theta) + b * np.sin(k * theta)
            return r
        raise InvalidCurveError(f"radius undefined for kind {self.kind!r}")

    def point_at(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        r = self.radius_at(theta)
        pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
        if self.kind == "circle":
            pts = pts + np.asarray(self.center)
        return pts

    def validate(self, n_samples: int = 1024) -> None:
        for comp in self.components():
            theta = np.linspace(0.0, 2 * np.pi, n_samples, endpoint=False)
            r = comp.radius_at(theta)
            if np.any(r <= 0):
                bad = theta[np.argmin(r)]
                raise InvalidCurveError(f"non-positive radius {r.min():.4g} at theta={bad:.4g}")

    def contains(self, pt) -> bool:
        """Analytic inside test (strict)."""
        pt = np.asarray(pt, dtype=float)
        for comp in self.components():
            d = pt - np.asarray(comp.center) if comp.kind == "circle" else pt
            rho = np.hypot(*d)
            if rho < comp.radius_at(np.arctan2(d[1], d[0])):
                return True
        return False


@dataclass(frozen=True)
class Polygon:
    """Closed polygon stored as an (n, 2) vertex array, last vertex not repeated."""

    vertices: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("polygon needs at least 3 vertices of dimension 2")
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def signed_area(self) -> float:
        x, y = self.vertices.T
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def edge_lengths(self) -> np.ndarray:
        a, b = self.segments()
        return np.linalg.norm(b - a, axis=1)

    def max_edge(self) -> float:
        return float(self.edge_lengths().max())

    def perimeter(self) -> float:
        return float(self.edge_lengths().sum())

    def is_simple(self) -> bool:
        a, b = self.segments()
        n = len(a)
        for i in range(n):
            # skip the two neighbours sharing a vertex with segment i
            js = np.array([j for j in range(i + 2, n) if not (i == 0 and j == n - 1)], dtype=int)
            if js.size and np.any(_segments_intersect(a[i], b[i], a[js], b[js])):
                return False
        return True

    def ccw(self) -> "Polygon":
        return self if self.signed_area > 0 else Polygon(self.vertices[::-1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for x, y in self.vertices:
                w.writerow([repr(float(x)), repr(float(y))])

    @classmethod
    def from_csv(cls, path) -> "Polygon":
        rows = []
        with open(Path(path), newline="") as fh:
            for row in csv.reader(fh):
                if row:
                    rows.append((float(row[0]), float(row[1])))
        return cls(np.array(rows))


def _cross(o, a, b):
    return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (b[..., 0] - o[..., 0])


def _segments_intersect(p1, p2, q1, q2) -> np.ndarray:
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    return (d1 * d2 <= 0) & (d3 * d4 <= 0)


def sample_polar_boundary(curve: PolarCurve, n_segments: int):
    """Sample ``curve`` at ``n_segments`` equally spaced angles.

    Returns a counterclockwise :class:`Polygon`, or a list of polygons for a
    disk union (one per disk).
    """
    if n_segments < 3:
        raise ValueError("n_segments must be >= 3")
    curve.validate()
    theta = 2 * np.pi * np.arange(n_segments) / n_segments
    if curve.kind == "disk-union":
        return [Polygon(c.point_at(theta)) for c in curve.circles]
    r = curve.radius_at(theta)
    if np.any(r <= 0):
        raise InvalidCurveError("non-positive radius sample")
    return Polygon(curve.point_at(theta))


def point_segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from each point to each segment, shape (n_pts, n_segments)."""
    pts = np.atleast_2d(pts)
    ab = b - a
    den = np.einsum("ij,ij->i", ab, ab)
    den = np.where(den > 0, den, 1.0)
    ap = pts[:, None, :] - a[None, :, :]
    s = np.clip(np.einsum("pij,ij->pi", ap, ab) / den, 0.0, 1.0)
    diff = ap - s[..., None] * ab[None]
    return np.sqrt(np.einsum("pij,pij->pi", diff, diff))


def point_in_polygon(poly: Polygon, pt, tol: float = 1e-12) -> bool:
    """Ray-crossing test; points within ``tol`` of an edge count as inside."""
    pt = np.asarray(pt, dtype=float)
    a, b = poly.segments()
    if point_segment_distance(pt[None], a, b).min() <= tol:
        return True
    x, y = pt
    ya, yb = a[:, 1], b[:, 1]
    straddle = (ya > y) != (yb > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = a[:, 0] + (y - ya) * (b[:, 0] - a[:, 0]) / (yb - ya)
    return bool(np.count_nonzero(straddle & (xc > x)) % 2)


def points_in_polygon(poly: Polygon, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Vectorised :func:`point_in_polygon` for an (n, 2) array."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.empty(len(pts), dtype=bool)
    a, b = poly.segments()
    for lo in range(0, len(pts), 2048):
        p = pts[lo:lo + 2048]
        x, y = p[:, :1], p[:, 1:]
        ya, yb = a[None, :, 1], b[None, :, 1]
        straddle = (ya > y) != (yb > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = a[None, :, 0] + (y - ya) * (b[None, :, 0] - a[None, :, 0]) / (yb - ya)
        inside = np.count_nonzero(straddle & (xc > x), axis=1) % 2 == 1
        near = point_segment_distance(p, a, b).min(axis=1) <= tol
        out[lo:lo + 2048] = inside | near
    return out


def _supersample(poly: Polygon, spacing: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Points along the polygon with at most ``spacing`` between neighbours.

    Also returns, for each point, the owning segment index and the local
    parameter in [0, 1].
    """
    a, b = poly.segments()
    lengths = np.linalg.norm(b - a, axis=1)
    counts = np.maximum(1, np.ceil(lengths / spacing).astype(int))
    seg = np.repeat(np.arange(len(a)), counts)
    offs = np.concatenate([np.arange(c) / c for c in counts])
    pts = a[seg] + offs[:, None] * (b[seg] - a[seg])
    return pts, seg, offs


def _min_dist(pts, a, b, chunk=1024):
    out = np.empty(len(pts))
    for lo in range(0, len(pts), chunk):
        out[lo:lo + chunk] = point_segment_distance(pts[lo:lo + chunk], a, b).min(axis=1)
    return out


def _directed(a: Polygon, ba: np.ndarray, bb: np.ndarray, spacing: float, n_refine: int = 8) -> float:
    pts, seg, offs = _supersample(a, spacing)
    d = _min_dist(pts, ba, bb)
    best = float(d.max())
    va, vb = a.segments()
    step = spacing / np.maximum(np.linalg.norm(vb - va, axis=1), 1e-300)
    # polish the largest samples with a bounded 1D search on their segment
    for idx in np.argsort(d)[::-1][:n_refine]:
        s0, k = offs[idx], seg[idx]
        lo, hi = max(0.0, s0 - step[k]), min(1.0, s0 + step[k])

        def neg(s, k=k):
            p = va[k] + s * (vb[k] - va[k])
            return -float(point_segment_distance(p[None], ba, bb).min())

        res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        best = max(best, -res.fun, -neg(hi))
    return best


def _same(a: Polygon, b: Polygon) -> bool:
    """Identical vertex lists (projection round-off would otherwise give ~1e-17)."""
    return a.vertices.shape == b.vertices.shape and bool(np.array_equal(a.vertices, b.vertices))


def directed_hausdorff(a: Polygon, b: Polygon, spacing: float) -> float:
    """sup over the curve of ``a`` of the distance to the curve of ``b``."""
    ba, bb = b.segments()
    return _directed(a, ba, bb, spacing)


def hausdorff_distance(a: Polygon, b: Polygon) -> float:
    """Symmetric Hausdorff distance between the boundary curves of two polygons."""
    if _same(a, b):
        return 0.0
    spacing = min(a.max_edge(), b.max_edge()) / 10.0
    return max(directed_hausdorff(a, b, spacing), directed_hausdorff(b, a, spacing))


def hausdorff_curves(a: Sequence[Polygon], b: Sequence[Polygon]) -> float:
    """Hausdorff distance between two finite unions of closed curves.

    Returns ``inf`` when exactly one side is empty.
    """
    if not a and not b:
        return 0.0
    if not a or not b:
        return float("inf")
    if len(a) == len(b) and all(_same(p, q) for p, q in zip(a, b)):
        return 0.0
    spacing = min(p.max_edge() for p in list(a) + list(b)) / 10.0

    def directed(src, dst):
        ba = np.concatenate([q.segments()[0] for q in dst])
        bb = np.concatenate([q.segments()[1] for q in dst])
        return max(_directed(p, ba, bb, spacing) for p in src)

    return max(directed(a, b), directed(b, a))


def write_polygons(path, polygons: Sequence[Polygon]) -> None:
    """Polygon CSV with one blank line between components."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for i, poly in enumerate(polygons):
            if i:
                fh.write("\n")
            for x, y in poly.vertices:
                w.writerow([repr(float(x)), repr(float(y))])


def read_polygons(path) -> list[Polygon]:
    """Inverse of :func:`write_polygons`; a plain single-polygon file gives one item."""
    out, cur = [], []
    with open(Path(path), newline="") as fh:
        for row in csv.reader(fh):
            if not row or not "".join(row).strip():
                if cur:
                    out.append(Polygon(np.array(cur)))
                cur = []
                continue
            cur.append((float(row[0]), float(row[1])))
    if cur:
        out.append(Polygon(np.array(cur)))
    return out
