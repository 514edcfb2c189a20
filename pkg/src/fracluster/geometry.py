"""Pixel grids over the domain and analytic planar regions.

Every region answers two questions used throughout the package:

* ``contains(points)`` -- vectorized set membership, and
* ``crossings(origins, dirs)`` -- distances ``t >= 0`` along rays
  ``origin + t * dir`` at which the ray may cross the region boundary.

``crossings`` is allowed to return a superset of the true boundary
crossings (for instance full lines instead of rays); callers resolve the
indicator between consecutive breakpoints by sampling ``contains``.
``angular_breaks(x)`` lists the ray directions seen from ``x`` at which the
crossing structure changes (vertices, directions parallel to edges);
``breaks_many(points)`` is the vectorized form, padded with ``nan``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

__all__ = [
    "Region",
    "HalfPlane",
    "Sector",
    "Polygon",
    "Disk",
    "Plane",
    "Intersection",
    "Union",
    "Complement",
    "ExteriorDatum",
    "Grid",
    "build_grid",
    "region_contains",
    "box_polygon",
    "steiner_exterior_datum",
    "steiner_halfplane_datum",
    "halfplane_datum",
    "region_from_dict",
    "datum_from_dict",
]


def _as_points(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _line_crossing(origins, dirs, point, direction):
    """Ray parameter where ``origins + t*dirs`` meets the line ``point + u*direction``.

    Returns ``(t, u)``; both are ``inf`` for parallel rays.
    """
    px, py = point
    qx, qy = direction
    ox = origins[..., 0] - px
    oy = origins[..., 1] - py
    ex, ey = dirs[..., 0], dirs[..., 1]
    den = ex * qy - ey * qx
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = (qx * oy - qy * ox) / den
        u = (ex * oy - ey * ox) / den
    bad = np.abs(den) < 1e-300
    t = np.where(bad, np.inf, t)
    u = np.where(bad, np.inf, u)
    return t, u


def _clean(t):
    """Negative or non-finite crossing parameters become ``inf`` (no crossing)."""
    t = np.where(np.isfinite(t) & (t >= 0.0), t, np.inf)
    return t


class Region:
    """Base class for analytic planar regions (open sets, boundaries ignored)."""

    def contains(self, points) -> np.ndarray:
        raise NotImplementedError

    def crossings(self, origins, dirs) -> np.ndarray:
        raise NotImplementedError

    def angular_breaks(self, x) -> list[float]:
        return []

    def breaks_many(self, points) -> np.ndarray:
        """Array ``(N, B)`` of break directions for each point (``nan`` = unused slot)."""
        p = _as_points(points).reshape(-1, 2)
        rows = [self.angular_breaks(x) for x in p]
        width = max((len(r) for r in rows), default=0)
        out = np.full((len(rows), width), np.nan)
        for i, r in enumerate(rows):
            out[i, : len(r)] = r
        return out

    def boundary_lines(self) -> list[tuple[tuple[float, float], tuple[float, float], float, float]]:
        """Straight boundary pieces ``(point, direction, u_min, u_max)``; curved pieces are omitted."""
        return []

    def to_dict(self) -> dict:
        raise NotImplementedError

    def is_empty(self) -> bool:
        return False


@dataclass(frozen=True)
class HalfPlane(Region):
    """The open half-plane ``{x : x . normal > offset}``."""

    normal: tuple[float, float]
    offset: float = 0.0

    def __post_init__(self):
        n = tuple(float(v) for v in self.normal)
        if abs(math.hypot(*n) - 1.0) > 1e-12:
            raise ValueError(f"half-plane normal must be a unit vector, got {n}")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    def contains(self, points):
        p = _as_points(points)
        return p[..., 0] * self.normal[0] + p[..., 1] * self.normal[1] > self.offset

    def crossings(self, origins, dirs):
        nx, ny = self.normal
        g0 = origins[..., 0] * nx + origins[..., 1] * ny - self.offset
        g1 = dirs[..., 0] * nx + dirs[..., 1] * ny
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t = -g0 / g1
        return _clean(t)[..., None]

    def angular_breaks(self, x):
        a = math.atan2(self.normal[1], self.normal[0])
        return [a + math.pi / 2, a - math.pi / 2]

    def breaks_many(self, points):
        n = _as_points(points).reshape(-1, 2).shape[0]
        return np.tile(np.array(self.angular_breaks(None)), (n, 1))

    def boundary_lines(self):
        nx, ny = self.normal
        return [((self.offset * nx, self.offset * ny), (-ny, nx), -math.inf, math.inf)]

    def to_dict(self):
        return {"type": "halfplane", "normal": list(self.normal), "offset": self.offset}


@dataclass(frozen=True)
class Sector(Region):
    """Points whose polar angle about ``vertex`` lies in ``[start, end)`` mod 2*pi."""

    vertex: tuple[float, float]
    start: float
    end: float

    def __post_init__(self):
        opening = float(self.end) - float(self.start)
        if not 0.0 < opening < TWO_PI:
            raise ValueError(f"sector opening must lie in (0, 2*pi), got {opening}")
        start = math.fmod(float(self.start), TWO_PI)
        if start < 0:
            start += TWO_PI
        object.__setattr__(self, "vertex", tuple(float(v) for v in self.vertex))
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", start + opening)

    @property
    def opening(self) -> float:
        return self.end - self.start

    def contains(self, points):
        p = _as_points(points)
        ang = np.arctan2(p[..., 1] - self.vertex[1], p[..., 0] - self.vertex[0])
        rel = np.mod(ang - self.start, TWO_PI)
        return rel < self.opening

    def crossings(self, origins, dirs):
        out = []
        for a in (self.start, self.end):
            t, u = _line_crossing(origins, dirs, self.vertex, (math.cos(a), math.sin(a)))
            out.append(_clean(np.where(u >= 0.0, t, np.inf)))
        return np.stack(out, axis=-1)

    def angular_breaks(self, x):
        vx, vy = self.vertex
        br = [self.start, self.start + math.pi, self.end, self.end + math.pi]
        if x[0] != vx or x[1] != vy:
            br.append(math.atan2(vy - x[1], vx - x[0]))
        return br

    def breaks_many(self, points):
        p = _as_points(points).reshape(-1, 2)
        fixed = np.array([self.start, self.start + math.pi, self.end, self.end + math.pi])
        dx = self.vertex[0] - p[:, 0]
        dy = self.vertex[1] - p[:, 1]
        to_vertex = np.where((dx == 0) & (dy == 0), np.nan, np.arctan2(dy, dx))
        return np.column_stack([np.tile(fixed, (len(p), 1)), to_vertex])

    def boundary_lines(self):
        return [(self.vertex, (math.cos(a), math.sin(a)), 0.0, math.inf) for a in (self.start, self.end)]

    def to_dict(self):
        return {"type": "sector", "vertex": list(self.vertex), "start": self.start, "end": self.end}


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


@dataclass(frozen=True)
class Polygon(Region):
    """A simple polygon given by its vertices in counterclockwise order.

    An empty vertex list denotes the empty region.
    """

    vertices: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        verts = tuple(tuple(float(c) for c in v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        n = len(verts)
        if n == 0:
            return
        if n < 3:
            raise ValueError("polygon needs at least 3 vertices")
        area2 = sum(verts[i][0] * verts[(i + 1) % n][1] - verts[(i + 1) % n][0] * verts[i][1] for i in range(n))
        if area2 <= 0:
            raise ValueError("polygon vertices must be counterclockwise")
        for i in range(n):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                if _segments_intersect(verts[i], verts[(i + 1) % n], verts[j], verts[(j + 1) % n]):
                    raise ValueError("polygon is not simple")

    def is_empty(self):
        return not self.vertices

    def _edges(self):
        v = np.asarray(self.vertices)
        return v, np.roll(v, -1, axis=0)

    def contains(self, points):
        p = _as_points(points)
        inside = np.zeros(p.shape[:-1], dtype=bool)
        if self.is_empty():
            return inside
        a, b = self._edges()
        x, y = p[..., 0], p[..., 1]
        for (ax, ay), (bx, by) in zip(a, b):
            straddle = (ay > y) != (by > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = ax + (y - ay) * (bx - ax) / (by - ay)
            inside ^= straddle & (x < xc)
        return inside

    def crossings(self, origins, dirs):
        if self.is_empty():
            return np.full(origins.shape[:-1] + (1,), np.inf)
        a, b = self._edges()
        out = []
        for p, q in zip(a, b):
            t, u = _line_crossing(origins, dirs, p, q - p)
            out.append(_clean(np.where((u >= -1e-12) & (u <= 1.0 + 1e-12), t, np.inf)))
        return np.stack(out, axis=-1)

    def angular_breaks(self, x):
        return [math.atan2(vy - x[1], vx - x[0]) for vx, vy in self.vertices if (vx, vy) != tuple(x)]

    def breaks_many(self, points):
        p = _as_points(points).reshape(-1, 2)
        if self.is_empty():
            return np.empty((len(p), 0))
        v = np.asarray(self.vertices)
        dx = v[None, :, 0] - p[:, 0:1]
        dy = v[None, :, 1] - p[:, 1:2]
        return np.where((dx == 0) & (dy == 0), np.nan, np.arctan2(dy, dx))

    def boundary_lines(self):
        v = self.vertices
        return [(v[i], (v[(i + 1) % len(v)][0] - v[i][0], v[(i + 1) % len(v)][1] - v[i][1]), 0.0, 1.0) for i in range(len(v))]

    def to_dict(self):
        return {"type": "polygon", "vertices": [list(v) for v in self.vertices]}


@dataclass(frozen=True)
class Disk(Region):
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, points):
        p = _as_points(points)
        return (p[..., 0] - self.center[0]) ** 2 + (p[..., 1] - self.center[1]) ** 2 < self.radius**2

    def crossings(self, origins, dirs):
        ox = origins[..., 0] - self.center[0]
        oy = origins[..., 1] - self.center[1]
        b = ox * dirs[..., 0] + oy * dirs[..., 1]
        c = ox * ox + oy * oy - self.radius**2
        disc = b * b - c
        root = np.sqrt(np.maximum(disc, 0.0))
        t1 = np.where(disc > 0, -b - root, np.inf)
        t2 = np.where(disc > 0, -b + root, np.inf)
        return np.stack([_clean(t1), _clean(t2)], axis=-1)

    def angular_breaks(self, x):
        dx, dy = self.center[0] - x[0], self.center[1] - x[1]
        dist = math.hypot(dx, dy)
        if dist <= self.radius:
            return []
        a = math.atan2(dy, dx)
        w = math.asin(self.radius / dist)
        return [a - w, a + w]

    def breaks_many(self, points):
        p = _as_points(points).reshape(-1, 2)
        dx = self.center[0] - p[:, 0]
        dy = self.center[1] - p[:, 1]
        dist = np.hypot(dx, dy)
        a = np.arctan2(dy, dx)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            w = np.where(dist > self.radius, np.arcsin(np.minimum(self.radius / dist, 1.0)), np.nan)
        return np.column_stack([a - w, a + w])

    def to_dict(self):
        return {"type": "disk", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Plane(Region):
    """The whole plane."""

    def contains(self, points):
        p = _as_points(points)
        return np.ones(p.shape[:-1], dtype=bool)

    def crossings(self, origins, dirs):
        return np.full(origins.shape[:-1] + (1,), np.inf)

    def breaks_many(self, points):
        return np.empty((len(_as_points(points).reshape(-1, 2)), 0))

    def to_dict(self):
        return {"type": "plane"}


def _junctions(parts) -> list[tuple[float, float]]:
    """Points where straight boundary pieces of different parts cross."""
    lines = [(k, ln) for k, r in enumerate(parts) for ln in r.boundary_lines()]
    pts = []
    for i in range(len(lines)):
        ki, (p, d, lo, hi) = lines[i]
        for j in range(i + 1, len(lines)):
            kj, (q, e, lo2, hi2) = lines[j]
            if ki == kj:
                continue
            den = d[0] * e[1] - d[1] * e[0]
            if abs(den) < 1e-14 * math.hypot(*d) * math.hypot(*e):
                continue
            wx, wy = q[0] - p[0], q[1] - p[1]
            u = (wx * e[1] - wy * e[0]) / den
            v = (wx * d[1] - wy * d[0]) / den
            if lo - 1e-12 <= u <= hi + 1e-12 and lo2 - 1e-12 <= v <= hi2 + 1e-12:
                pts.append((p[0] + u * d[0], p[1] + u * d[1]))
    return pts


def _junction_breaks(parts, points) -> np.ndarray:
    p = _as_points(points).reshape(-1, 2)
    j = np.asarray(_junctions(parts), dtype=float).reshape(-1, 2)
    dx = j[None, :, 0] - p[:, 0:1]
    dy = j[None, :, 1] - p[:, 1:2]
    return np.where((dx == 0) & (dy == 0), np.nan, np.arctan2(dy, dx))


@dataclass(frozen=True)
class Intersection(Region):
    parts: tuple[Region, ...]

    def contains(self, points):
        out = self.parts[0].contains(points)
        for r in self.parts[1:]:
            out = out & r.contains(points)
        return out

    def crossings(self, origins, dirs):
        return np.concatenate([r.crossings(origins, dirs) for r in self.parts], axis=-1)

    def angular_breaks(self, x):
        own = [math.atan2(py - x[1], px - x[0]) for px, py in _junctions(self.parts) if (px, py) != tuple(x)]
        return [a for r in self.parts for a in r.angular_breaks(x)] + own

    def breaks_many(self, points):
        return np.concatenate([r.breaks_many(points) for r in self.parts] + [_junction_breaks(self.parts, points)], axis=1)

    def boundary_lines(self):
        return [ln for r in self.parts for ln in r.boundary_lines()]

    def is_empty(self):
        return any(r.is_empty() for r in self.parts)

    def to_dict(self):
        return {"type": "intersection", "parts": [r.to_dict() for r in self.parts]}


@dataclass(frozen=True)
class Union(Region):
    parts: tuple[Region, ...]

    def contains(self, points):
        p = _as_points(points)
        out = np.zeros(p.shape[:-1], dtype=bool)
        for r in self.parts:
            out = out | r.contains(p)
        return out

    def crossings(self, origins, dirs):
        if not self.parts:
            return np.full(origins.shape[:-1] + (1,), np.inf)
        return np.concatenate([r.crossings(origins, dirs) for r in self.parts], axis=-1)

    def angular_breaks(self, x):
        own = [math.atan2(py - x[1], px - x[0]) for px, py in _junctions(self.parts) if (px, py) != tuple(x)]
        return [a for r in self.parts for a in r.angular_breaks(x)] + own

    def breaks_many(self, points):
        p = _as_points(points).reshape(-1, 2)
        if not self.parts:
            return np.empty((len(p), 0))
        return np.concatenate([r.breaks_many(p) for r in self.parts] + [_junction_breaks(self.parts, p)], axis=1)

    def boundary_lines(self):
        return [ln for r in self.parts for ln in r.boundary_lines()]

    def is_empty(self):
        return all(r.is_empty() for r in self.parts)

    def to_dict(self):
        return {"type": "union", "parts": [r.to_dict() for r in self.parts]}


@dataclass(frozen=True)
class Complement(Region):
    part: Region

    def contains(self, points):
        return ~self.part.contains(points)

    def crossings(self, origins, dirs):
        return self.part.crossings(origins, dirs)

    def angular_breaks(self, x):
        return self.part.angular_breaks(x)

    def boundary_lines(self):
        return self.part.boundary_lines()

    def breaks_many(self, points):
        return self.part.breaks_many(points)

    def to_dict(self):
        return {"type": "complement", "part": self.part.to_dict()}


def box_polygon(x0: float, y0: float, x1: float, y1: float) -> Polygon:
    """The axis-aligned rectangle ``(x0, x1) x (y0, y1)`` as a counterclockwise polygon."""
    return Polygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def region_contains(r: Region, x) -> bool:
    """Membership of a single point."""
    return bool(r.contains(np.asarray(x, dtype=float)))


def region_from_dict(d: dict) -> Region:
    kind = d.get("type")
    if kind == "halfplane":
        return HalfPlane(tuple(d["normal"]), d.get("offset", 0.0))
    if kind == "sector":
        return Sector(tuple(d["vertex"]), d["start"], d["end"])
    if kind == "polygon":
        return Polygon(tuple(tuple(v) for v in d.get("vertices", ())))
    if kind == "disk":
        return Disk(tuple(d["center"]), d["radius"])
    if kind == "plane":
        return Plane()
    if kind == "intersection":
        return Intersection(tuple(region_from_dict(p) for p in d["parts"]))
    if kind == "union":
        return Union(tuple(region_from_dict(p) for p in d["parts"]))
    if kind == "complement":
        return Complement(region_from_dict(d["part"]))
    raise ValueError(f"unknown region type {kind!r}")


@dataclass(frozen=True)
class ExteriorDatum:
    """Phases prescribed outside the domain; ``phases[i]`` is a union of regions."""

    phases: tuple[tuple[Region, ...], ...]

    def __post_init__(self):
        phases = tuple(tuple(p) if isinstance(p, (list, tuple)) else (p,) for p in self.phases)
        object.__setattr__(self, "phases", phases)

    @property
    def k(self) -> int:
        return len(self.phases)

    def region(self, i: int) -> Region:
        parts = self.phases[i]
        return parts[0] if len(parts) == 1 else Union(parts)

    def membership(self, points) -> np.ndarray:
        """Boolean array ``(..., k)``: which phases contain each point."""
        p = _as_points(points)
        return np.stack([self.region(i).contains(p) for i in range(self.k)], axis=-1)

    def phase_of(self, points) -> np.ndarray:
        """Phase index of each point, ``-1`` where uncovered, ``-2`` where ambiguous."""
        m = self.membership(points)
        count = m.sum(axis=-1)
        idx = np.argmax(m, axis=-1)
        return np.where(count == 1, idx, np.where(count == 0, -1, -2))

    def check_partition(self, points) -> tuple[int, int]:
        """Counts of (uncovered, multiply covered) sample points."""
        m = self.membership(points)
        count = m.sum(axis=-1)
        return int(np.sum(count == 0)), int(np.sum(count > 1))

    def to_dict(self):
        return {"phases": [[r.to_dict() for r in p] for p in self.phases]}


def datum_from_dict(d: dict) -> ExteriorDatum:
    return ExteriorDatum(tuple(tuple(region_from_dict(r) for r in p) for p in d["phases"]))


def _steiner_normals():
    return [(math.cos(2 * math.pi * i / 3), math.sin(2 * math.pi * i / 3)) for i in (1, 2, 3)]


def steiner_exterior_datum(k: int = 3) -> ExteriorDatum:
    """Three 120-degree sectors at the origin, phase ``i`` bisected by ``n_{i+1}``.

    ``n_i = (cos(2 pi i/3), sin(2 pi i/3))`` so phase 2 (0-based) contains the
    positive x-axis.
    """
    if k != 3:
        raise ValueError("the Steiner datum has exactly three phases")
    phases = []
    for i in (1, 2, 3):
        mid = 2 * math.pi * i / 3
        phases.append((Sector((0.0, 0.0), mid - math.pi / 3, mid + math.pi / 3),))
    return ExteriorDatum(tuple(phases))


def steiner_halfplane_datum() -> ExteriorDatum:
    """Literal half-planes ``{x . n_i > 1/2}`` with overlaps given to the larger dot product.

    The central triangle ``{x . n_i <= 1/2 for all i}`` (circumradius 1) stays
    uncovered, so the domain has to contain it.
    """
    sectors = steiner_exterior_datum().phases
    phases = []
    for n, (sec,) in zip(_steiner_normals(), sectors):
        phases.append((Intersection((HalfPlane(n, 0.5), sec)),))
    return ExteriorDatum(tuple(phases))


def halfplane_datum(normal=(1.0, 0.0), offset: float = 0.0) -> ExteriorDatum:
    """Two phases split by a line: phase 0 is ``{x . n < b}``, phase 1 is ``{x . n >= b}``.

    Phase 1 is closed so that cell centers on the line are still covered.
    """
    n = tuple(float(v) for v in normal)
    norm = math.hypot(*n)
    n = (n[0] / norm, n[1] / norm)
    below = HalfPlane((-n[0], -n[1]), -offset)
    return ExteriorDatum(((below,), (Complement(below),)))


@dataclass(frozen=True, eq=False)
class Grid:
    """Square cells of side ``h``; ``omega_mask[i, j]`` marks cells (x-index i, y-index j) in the domain."""

    origin: tuple[float, float]
    h: float
    nx: int
    ny: int
    omega_mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("cell size must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell")
        mask = np.array(self.omega_mask, dtype=bool)
        if mask.shape != (self.nx, self.ny):
            raise ValueError(f"omega_mask shape {mask.shape} != {(self.nx, self.ny)}")
        if not mask.any():
            raise ValueError("domain does not intersect grid")
        mask.setflags(write=False)
        object.__setattr__(self, "omega_mask", mask)
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "h", float(self.h))

    def centers(self) -> np.ndarray:
        i = np.arange(self.nx)
        j = np.arange(self.ny)
        cx = self.origin[0] + (i + 0.5) * self.h
        cy = self.origin[1] + (j + 0.5) * self.h
        return np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1)

    def center(self, i: int, j: int) -> tuple[float, float]:
        return (self.origin[0] + (i + 0.5) * self.h, self.origin[1] + (j + 0.5) * self.h)

    @property
    def n_interior(self) -> int:
        return int(self.omega_mask.sum())

    def interior_indices(self) -> np.ndarray:
        return np.argwhere(self.omega_mask)

    def key(self) -> str:
        """Stable text key for caching."""
        import hashlib

        hsh = hashlib.sha256(np.packbits(self.omega_mask).tobytes()).hexdigest()[:16]
        return f"{self.origin[0]!r},{self.origin[1]!r},{self.h!r},{self.nx},{self.ny},{hsh}"

    def to_dict(self):
        return {"origin": list(self.origin), "h": self.h, "nx": self.nx, "ny": self.ny}


def build_grid(domain: Sequence[Sequence[float]], n: int, omega: Region) -> Grid:
    """Grid over the box ``domain = ((x0, y0), (x1, y1))`` with ``n`` cells across.

    A cell belongs to the domain when its center lies in ``omega``.
    """
    if n < 2:
        raise ValueError("need at least 2 cells per side")
    (x0, y0), (x1, y1) = domain
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate box")
    h = (x1 - x0) / n
    ny = int(round((y1 - y0) / h))
    if ny < 1 or abs(ny * h - (y1 - y0)) > 1e-9 * (y1 - y0):
        raise ValueError("box height must be a whole number of cells")
    cx = x0 + (np.arange(n) + 0.5) * h
    cy = y0 + (np.arange(ny) + 0.5) * h
    pts = np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1)
    mask = omega.contains(pts)
    if not mask.any():
        raise ValueError("domain does not intersect grid")
    return Grid((x0, y0), h, n, ny, mask)
