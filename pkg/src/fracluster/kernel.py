"""The singular interaction J_s(A, B) = int_A int_B |x - y|^-(2+s) dy dx.

Cell-cell interactions between squares that touch or nearly touch use an exact
closed form.  The 4D integral collapses to a 2D integral over the difference
vector ``z = y - x`` weighted by the overlap lengths of the shifted intervals,
``int w_x(u) w_y(v) (u^2 + v^2)^-(2+s)/2 du dv``, where each weight is
piecewise linear.  Every piece is a polynomial of degree <= 1 in each variable
times the kernel and integrates in closed form through incomplete beta
functions.  Separated pairs use a tensor Gauss-Legendre rule whose order
depends on the distance.

Cell-region interactions integrate the point potential
``phi(x) = int_R |x - y|^-(2+s) dy`` over the cell.  The potential is computed
with rays from ``x``: along each ray the radial integral is exact, so only the
angular direction needs quadrature.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal, special

from .geometry import Complement, ExteriorDatum, Grid, Intersection, Region, box_polygon

__all__ = [
    "FractionalParameter",
    "Cell",
    "RegionIntegral",
    "InteractionMatrix",
    "kernel_value",
    "j_rects",
    "j_cells",
    "j_cell_region",
    "point_potential",
    "point_potentials",
    "build_interaction_matrix",
]

CACHE_ENV = "FRACLUSTER_CACHE_DIR"
_CACHE_VERSION = 1


@dataclass(frozen=True)
class FractionalParameter:
    """Exponent ``s`` plus quadrature settings.

    ``near_factor`` is the center distance, in units of the cell side, below
    which the closed form is used instead of Gauss-Legendre.  ``r_cut`` limits
    the rays of the point potential; the default ``inf`` means the radial
    integrals run to infinity exactly and no tail bound is needed.
    """

    s: float
    d: int = 2
    quad_tol: float = 1e-10
    r_cut: float = math.inf
    near_factor: float = 4.0

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not self.quad_tol > 0:
            raise ValueError("quad_tol must be positive")
        if not self.r_cut > 0:
            raise ValueError("r_cut must be positive")
        if self.d < 1:
            raise ValueError("dimension must be positive")


def _s_of(p) -> float:
    return p.s if isinstance(p, FractionalParameter) else float(p)


def kernel_value(x, y, p, d: int | None = None) -> float:
    """``|x - y|^-(d+s)``; ``p`` is a FractionalParameter or a bare exponent."""
    if isinstance(p, FractionalParameter):
        s, dim = p.s, p.d if d is None else d
    else:
        s, dim = float(p), 2 if d is None else d
    r = math.dist(x, y)
    if r == 0.0:
        raise ValueError("kernel is singular at x == y")
    return r ** -(dim + s)


# ---------------------------------------------------------------------------
# closed form for rectangles


def _corner(U: float, V: float, p: int, q: int, s: float) -> float:
    """Finite-part antiderivative of ``u^p v^q (u^2+v^2)^-(2+s)/2`` on ``[0,U]x[0,V]``.

    Divergent terms at the origin are dropped; they cancel in the
    inclusion-exclusion over the four corners of any piece whose weight
    vanishes at the origin, which is the case for disjoint cells.
    """
    if U == 0.0 or V == 0.0:
        return 0.0
    m = p + q
    a = 0.5 * (1.0 + s)
    R2 = U * U + V * V
    R = math.sqrt(R2)
    half_beta = 0.5 * special.beta(a, 0.5)
    if q == 0:
        A = half_beta * special.betainc(0.5, a, V * V / R2)
    else:
        A = -math.expm1(s * math.log(U / R)) / s
    if p == 0:
        B = half_beta * special.betainc(0.5, a, U * U / R2)
    else:
        B = -math.expm1(s * math.log(V / R)) / s
    return (U ** (m - s) * A + V ** (m - s) * B) / (m - s)


def _monomial_rect(u1, u2, v1, v2, p, q, s) -> float:
    tot = 0.0
    for U, su in ((u2, 1), (u1, -1)):
        for V, sv in ((v2, 1), (v1, -1)):
            sg = su * sv * (math.copysign(1.0, U) if U else 0.0) ** (p + 1) * (math.copysign(1.0, V) if V else 0.0) ** (q + 1)
            if sg:
                tot += sg * _corner(abs(U), abs(V), p, q, s)
    return tot


def _overlap_pieces(a1, a2, b1, b2):
    """Linear pieces ``(lo, hi, c0, c1)`` of ``w(u) = |[a1,a2] ∩ [b1+u, b2+u]|``."""
    br = sorted({a2 - b2, a1 - b1, a2 - b1, a1 - b2})

    def w(u):
        return max(0.0, min(a2, b2 + u) - max(a1, b1 + u))

    out = []
    for lo, hi in zip(br[:-1], br[1:]):
        if hi <= lo:
            continue
        wl, wh = w(lo), w(hi)
        slope = (wh - wl) / (hi - lo)
        out.append((lo, hi, wl - slope * lo, slope))
    return out


def j_rects(A, B, s: float) -> float:
    """Closed-form J_s between axis-aligned rectangles ``(x0, x1, y0, y1)`` with disjoint interiors."""
    a1, a2, a3, a4 = A
    b1, b2, b3, b4 = B
    tot = 0.0
    for u1, u2, au, bu in _overlap_pieces(a1, a2, b1, b2):
        for v1, v2, av, bv in _overlap_pieces(a3, a4, b3, b4):
            tot += au * av * _monomial_rect(u1, u2, v1, v2, 0, 0, s)
            tot += bu * av * _monomial_rect(u1, u2, v1, v2, 1, 0, s)
            tot += au * bv * _monomial_rect(u1, u2, v1, v2, 0, 1, s)
            tot += bu * bv * _monomial_rect(u1, u2, v1, v2, 1, 1, s)
    return tot


def _gl01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _far_order(dist: float) -> int:
    if dist <= 8.0:
        return 8
    if dist <= 16.0:
        return 6
    if dist <= 40.0:
        return 4
    return 3


def _gl_rects(A, B, s: float, n: int) -> float:
    x, w = _gl01(n)
    ax = A[0] + (A[1] - A[0]) * x
    ay = A[2] + (A[3] - A[2]) * x
    bx = B[0] + (B[1] - B[0]) * x
    by = B[2] + (B[3] - B[2]) * x
    dx = (bx[None, :] - ax[:, None]).ravel()
    dy = (by[None, :] - ay[:, None]).ravel()
    wx = (w[:, None] * w[None, :]).ravel() * (A[1] - A[0]) * (B[1] - B[0])
    wy = (w[:, None] * w[None, :]).ravel() * (A[3] - A[2]) * (B[3] - B[2])
    f = (dx[:, None] ** 2 + dy[None, :] ** 2) ** (-(2.0 + s) / 2.0)
    return float(wx @ f @ wy)


def _unit_offset_j(di: int, dj: int, s: float, near_factor: float) -> float:
    """J_s between the unit square at the origin and its translate by ``(di, dj)``."""
    di, dj = abs(di), abs(dj)
    if dj > di:
        di, dj = dj, di
    if di == 0 and dj == 0:
        raise ValueError("self-interaction")
    dist = math.hypot(di, dj)
    A = (0.0, 1.0, 0.0, 1.0)
    B = (float(di), di + 1.0, float(dj), dj + 1.0)
    if dist <= near_factor:
        return j_rects(A, B, s)
    return _gl_rects(A, B, s, _far_order(dist))


@dataclass(frozen=True)
class Cell:
    """Axis-aligned square with lower-left corner ``(x0, y0)`` and side ``h``."""

    x0: float
    y0: float
    h: float

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + 0.5 * self.h, self.y0 + 0.5 * self.h)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x0, self.x0 + self.h, self.y0, self.y0 + self.h)

    @classmethod
    def of_grid(cls, g: Grid, i: int, j: int) -> "Cell":
        return cls(g.origin[0] + i * g.h, g.origin[1] + j * g.h, g.h)


def _snap(v: float) -> float:
    r = round(v)
    return float(r) if abs(v - r) < 1e-9 else v


def j_cells(a: Cell, b: Cell, p) -> float:
    """J_s(a, b) for disjoint squares.

    Equal-size cells on a common lattice are reduced to the canonical offset
    ``(max(|di|,|dj|), min(|di|,|dj|))`` so that ``j_cells(a, b)`` and
    ``j_cells(b, a)`` are bitwise equal and agree with the interaction table.
    """
    s = _s_of(p)
    near = p.near_factor if isinstance(p, FractionalParameter) else 4.0
    if a == b:
        raise ValueError("self-interaction")
    A, B = a.bounds, b.bounds
    if A[0] < B[1] and B[0] < A[1] and A[2] < B[3] and B[2] < A[3]:
        raise ValueError("cells overlap")
    if a.h == b.h:
        di = _snap((b.x0 - a.x0) / a.h)
        dj = _snap((b.y0 - a.y0) / a.h)
        if di == int(di) and dj == int(dj):
            return a.h ** (2.0 - s) * _unit_offset_j(int(di), int(dj), s, near)
    # general position: normalize by the first cell
    h = a.h
    An = (0.0, 1.0, 0.0, 1.0)
    Bn = tuple((v - o) / h for v, o in zip(B, (a.x0, a.x0, a.y0, a.y0)))
    dist = math.dist(((An[0] + An[1]) / 2, (An[2] + An[3]) / 2), ((Bn[0] + Bn[1]) / 2, (Bn[2] + Bn[3]) / 2))
    size = max(1.0, Bn[1] - Bn[0])
    if dist <= near * size:
        val = j_rects(An, Bn, s)
    else:
        val = _gl_rects(An, Bn, s, _far_order(dist / size))
    return h ** (2.0 - s) * val


# ---------------------------------------------------------------------------
# point potentials by ray casting


def _smooth_rule(n: int, m: int = 3):
    """Gauss-Legendre on [0,1] after the map ``u -> I_u(m+1, m+1)``.

    The map flattens the integrand at both panel ends, which tames the
    ``|theta - theta0|^s`` behaviour of ray integrals at break directions.
    """
    u, w = _gl01(n)
    psi = special.betainc(m + 1, m + 1, u)
    dpsi = (u * (1.0 - u)) ** m / special.beta(m + 1, m + 1)
    return psi, w * dpsi


def point_potentials(points, regions, p, *, n_gauss: int = 12, max_panel: float = math.pi / 4, chunk: int = 512):
    """``phi_j(x) = int_{regions[j]} |x - y|^-(2+s) dy`` for every point; shape ``(N, len(regions))``.

    Points must lie outside every region (boundary contact is fine).  With a
    finite ``r_cut`` the rays stop at that radius.
    """
    s = _s_of(p)
    r_cut = p.r_cut if isinstance(p, FractionalParameter) else math.inf
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    regions = list(regions)
    out = np.zeros((len(pts), len(regions)))
    if not len(pts) or not regions:
        return out
    psi, wt = _smooth_rule(n_gauss)
    uniform = np.arange(0.0, 2 * math.pi, max_panel)
    for k, r in enumerate(regions):
        if r.is_empty():
            continue
        for c0 in range(0, len(pts), chunk):
            P = pts[c0 : c0 + chunk]
            out[c0 : c0 + len(P), k] = _ray_integrals(P, r, s, r_cut, psi, wt, uniform)
    return out


def _ray_integrals(P, r: Region, s: float, r_cut: float, psi, wt, uniform) -> np.ndarray:
    C = len(P)
    br = np.mod(r.breaks_many(P), 2 * math.pi)
    br = np.where(np.isfinite(br), br, 2 * math.pi)
    br = np.sort(np.concatenate([np.tile(uniform, (C, 1)), br], axis=1), axis=1)
    edges = np.concatenate([br, np.full((C, 1), 2 * math.pi)], axis=1)
    lo, hi = edges[:, :-1], edges[:, 1:]
    width = hi - lo
    th = (lo[:, :, None] + width[:, :, None] * psi).reshape(C, -1)
    wts = (width[:, :, None] * wt).reshape(C, -1)
    dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
    org = np.broadcast_to(P[:, None, :], dirs.shape)
    t = np.sort(r.crossings(org, dirs), axis=-1)
    t_lo = np.concatenate([np.zeros(t.shape[:-1] + (1,)), t], axis=-1)
    t_hi = np.concatenate([t, np.full(t.shape[:-1] + (1,), np.inf)], axis=-1)
    valid = np.isfinite(t_lo) & (t_hi > t_lo) & (wts > 0.0)[..., None]
    mid = np.where(np.isfinite(t_hi), 0.5 * (t_lo + t_hi), t_lo + np.maximum(t_lo, 1.0))
    mid = np.where(valid, mid, 0.0)
    samples = org[:, :, None, :] + mid[..., None] * dirs[:, :, None, :]
    chi = r.contains(samples) & valid
    if np.any(chi & (t_lo == 0.0)):
        raise ValueError("point lies inside the region")
    a = np.minimum(t_lo, r_cut)
    b = np.minimum(t_hi, r_cut)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(chi & (b > a), (a**-s - b**-s) / s, 0.0)
    return (g.sum(axis=-1) * wts).sum(axis=-1)


def point_potential(x, region: Region, p, **kw) -> float:
    """Scalar potential of one region at one point."""
    return float(point_potentials(np.asarray(x, dtype=float)[None, :], [region], p, **kw)[0, 0])


@dataclass(frozen=True)
class RegionIntegral:
    """A cell-region interaction with its error bars."""

    value: float
    tail_bound: float = 0.0
    quad_error: float = 0.0

    def __float__(self):
        return self.value


def _square_rule(corners: np.ndarray, h: np.ndarray, n: int):
    """Tensor Gauss-Legendre nodes for many squares; returns points ``(S, n*n, 2)`` and weights ``(S, n*n)``."""
    u, w = _gl01(n)
    U, V = np.meshgrid(u, u, indexing="ij")
    pts = corners[:, None, :] + h[:, None, None] * np.stack([U.ravel(), V.ravel()], axis=-1)[None]
    wts = (h * h)[:, None] * np.outer(w, w).ravel()[None, :]
    return pts, wts


def _classify_square(r: Region, x0: float, y0: float, h: float) -> int:
    """1 if the square looks fully inside ``r``, 0 if fully outside, -1 if cut (5x5 probe)."""
    u = np.linspace(0.0, 1.0, 5)
    U, V = np.meshgrid(u, u, indexing="ij")
    pts = np.stack([x0 + h * U.ravel(), y0 + h * V.ravel()], axis=-1)
    # nudge boundary probes inward so open regions sharing an edge count as outside
    pts = np.clip(pts, [x0 + 1e-9 * h, y0 + 1e-9 * h], [x0 + h * (1 - 1e-9), y0 + h * (1 - 1e-9)])
    inside = r.contains(pts)
    if inside.all():
        return 1
    if not inside.any():
        return 0
    return -1


def _near_part(a: Cell, r: Region, s: float, max_depth: int) -> tuple[float, float]:
    """J_s(a, r ∩ N) for the ring N of the 8 neighbours of ``a``, by quadtree and closed form."""
    A = (0.0, 1.0, 0.0, 1.0)
    value = 0.0
    err = 0.0
    stack = [
        (float(di), float(dj), 1.0, 0)
        for di in (-1, 0, 1)
        for dj in (-1, 0, 1)
        if (di, dj) != (0, 0)
    ]
    while stack:
        qx, qy, qh, depth = stack.pop()
        kind = _classify_square(r, a.x0 + qx * a.h, a.y0 + qy * a.h, qh * a.h)
        if kind == 0:
            continue
        j = j_rects(A, (qx, qx + qh, qy, qy + qh), s)
        if kind == 1:
            value += j
        elif depth >= max_depth:
            value += 0.5 * j
            err += 0.5 * j
        else:
            hh = 0.5 * qh
            stack.extend((qx + ox * hh, qy + oy * hh, hh, depth + 1) for ox in (0, 1) for oy in (0, 1))
    scale = a.h ** (2.0 - s)
    return scale * value, scale * err


def j_cell_region(a: Cell, r: Region, p, *, n: int = 8, max_depth: int = 7, near_depth: int = 8) -> RegionIntegral:
    """J_s(a, r) for a region that does not overlap the cell (touching is fine).

    The part of ``r`` in the eight neighbouring cells is resolved by a
    quadtree whose fully covered squares use the exact rectangle formula; cut
    squares at the finest level count half and add to ``quad_error``.  The
    rest of ``r`` is at least one cell away and its smooth potential is
    integrated by adaptive Gauss-Legendre cubature: a square is accepted when
    its rule agrees with the sum over its four children to ``quad_tol``
    (floored at 1e-9, the accuracy of the potential itself).  With a finite
    ``r_cut`` the acceptance threshold also includes 1e-6 of the tail bound.
    """
    s = _s_of(p)
    tol = p.quad_tol if isinstance(p, FractionalParameter) else 1e-10
    tol = max(tol, 1e-9)
    r_cut = p.r_cut if isinstance(p, FractionalParameter) else math.inf
    if r.is_empty():
        return RegionIntegral(0.0)
    if _classify_square(r, a.x0, a.y0, a.h) != 0:
        raise ValueError("region overlaps the cell")

    near_val, near_err = _near_part(a, r, s, near_depth)
    far_region = Intersection((r, Complement(box_polygon(a.x0 - a.h, a.y0 - a.h, a.x0 + 2 * a.h, a.y0 + 2 * a.h))))

    def estimates(corners, h):
        pts, wts = _square_rule(corners, h, n)
        phi = point_potentials(pts.reshape(-1, 2), [far_region], p, n_gauss=20)[:, 0].reshape(pts.shape[:2])
        return (phi * wts).sum(axis=1)

    tail = 0.0
    if math.isfinite(r_cut):
        diam = math.sqrt(2.0) * a.h
        tail = a.h * a.h * (2 * math.pi / s) * max(r_cut - diam, 1e-300) ** -s

    corners = np.array([[a.x0, a.y0]])
    sizes = np.array([a.h])
    coarse = estimates(corners, sizes)
    scale = abs(coarse[0]) + near_val
    # the cutoff circle kinks the potential; refining far below the truncation error is pointless
    floor = 1e-6 * tail
    value = 0.0
    err = 0.0
    offsets = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    for depth in range(max_depth + 1):
        kid_h = np.repeat(0.5 * sizes, 4)
        kid_c = (corners[:, None, :] + 0.5 * sizes[:, None, None] * offsets[None]).reshape(-1, 2)
        kid_v = estimates(kid_c, kid_h)
        fine = kid_v.reshape(-1, 4).sum(axis=1)
        diff = np.abs(fine - coarse)
        done = diff <= (tol * scale + floor) / 4**depth
        if depth == max_depth:
            done[:] = True
        value += fine[done].sum()
        err += diff[done].sum()
        keep = np.repeat(~done, 4)
        corners, sizes, coarse = kid_c[keep], kid_h[keep], kid_v[keep]
        if not len(corners):
            break
    return RegionIntegral(float(value + near_val), tail, float(err + near_err))


# ---------------------------------------------------------------------------
# interaction table for a grid


@dataclass(eq=False)
class InteractionMatrix:
    """Translation-invariant cell-cell table plus per-cell exterior interactions.

    ``table[di, dj]`` holds J_s between two grid cells whose indices differ by
    ``(di, dj)``; it spans the grid box enlarged by ``pad`` cells on every
    side.  Cells of that enlarged box outside the domain carry the exterior
    phase of their center (``box_labels``).  Beyond it, the exterior is
    handled analytically (``far``).  ``ext[i, j, l]`` is the full interaction
    of grid cell ``(i, j)`` with exterior phase ``l``.
    """

    grid: Grid
    datum: ExteriorDatum
    param: FractionalParameter
    pad: int
    table: np.ndarray
    box_labels: np.ndarray
    far: np.ndarray
    ext: np.ndarray
    tail_bound: float = 0.0
    kernel_full: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        T = self.table.copy()
        T[0, 0] = 0.0
        top = np.concatenate([T[:0:-1, :0:-1], T[:0:-1, :]], axis=1)
        bottom = np.concatenate([T[:, :0:-1], T], axis=1)
        self.kernel_full = np.concatenate([top, bottom], axis=0)
        for arr in (self.table, self.box_labels, self.far, self.ext, self.kernel_full):
            arr.setflags(write=False)

    @property
    def k(self) -> int:
        return self.datum.k

    def pair(self, a, b) -> float:
        """J_s between grid cells with indices ``a = (i, j)`` and ``b``."""
        di, dj = abs(a[0] - b[0]), abs(a[1] - b[1])
        if di == 0 and dj == 0:
            raise ValueError("self-interaction")
        return float(self.table[di, dj])

    def row(self, i: int, j: int) -> np.ndarray:
        """J_s of cell ``(i, j)`` against every grid cell, 0 at the cell itself; shape ``(nx, ny)``."""
        cx, cy = self.table.shape[0] - 1, self.table.shape[1] - 1
        g = self.grid
        return self.kernel_full[cx - i : cx - i + g.nx, cy - j : cy - j + g.ny]

    def correlate(self, fields: np.ndarray) -> np.ndarray:
        """``out[i, j, l] = sum_{i', j'} J((i,j), (i',j')) * fields[i', j', l]`` over the grid box."""
        g = self.grid
        cx, cy = self.table.shape[0] - 1, self.table.shape[1] - 1
        out = np.empty(fields.shape, dtype=float)
        for l in range(fields.shape[-1]):
            full = signal.convolve(fields[..., l], self.kernel_full, mode="full")
            out[..., l] = full[cx : cx + g.nx, cy : cy + g.ny]
        return out

    def dense(self, memory_budget: int = 1 << 30) -> np.ndarray:
        """Explicit matrix over interior cells in ``grid.interior_indices()`` order."""
        idx = self.grid.interior_indices()
        n = len(idx)
        if n * n * 8 > memory_budget:
            raise MemoryError(
                f"dense interaction matrix needs {n * n * 8} bytes (> {memory_budget}); "
                "use the on-the-fly table access (row / pair) instead"
            )
        di = np.abs(idx[:, None, 0] - idx[None, :, 0])
        dj = np.abs(idx[:, None, 1] - idx[None, :, 1])
        W = self.table[di, dj].copy()
        np.fill_diagonal(W, 0.0)
        return W

    def ext_interior(self) -> np.ndarray:
        """``ext`` restricted to interior cells, shape ``(n_interior, k)``."""
        idx = self.grid.interior_indices()
        return self.ext[idx[:, 0], idx[:, 1]]


def offset_table(nx: int, ny: int, p: FractionalParameter, h: float = 1.0) -> np.ndarray:
    """``T[di, dj] = J_s`` between lattice cells offset by ``(di, dj)``; ``T[0, 0] = nan``."""
    T = np.empty((nx, ny))
    scale = h ** (2.0 - p.s)
    memo: dict[tuple[int, int], float] = {}
    for di in range(nx):
        for dj in range(ny):
            if di == 0 and dj == 0:
                T[0, 0] = np.nan
                continue
            key = (max(di, dj), min(di, dj))
            if key not in memo:
                memo[key] = _unit_offset_j(key[0], key[1], p.s, p.near_factor)
            T[di, dj] = scale * memo[key]
    return T


def _datum_hash(ext: ExteriorDatum) -> str:
    return hashlib.sha256(json.dumps(ext.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def _cache_key(g: Grid, ext: ExteriorDatum, p: FractionalParameter, pad: int, far_order: int, far_gauss: int) -> dict:
    return {
        "version": _CACHE_VERSION,
        "grid": g.key(),
        "datum": _datum_hash(ext),
        "s": p.s,
        "quad_tol": p.quad_tol,
        "r_cut": p.r_cut if math.isfinite(p.r_cut) else "inf",
        "near_factor": p.near_factor,
        "pad": pad,
        "far_order": far_order,
        "far_gauss": far_gauss,
    }


def _cache_path(cache_dir: Path, key: dict) -> Path:
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:24]
    return cache_dir / f"imatrix-{digest}.bin"


def _cache_load(path: Path, key: dict, shapes) -> list[np.ndarray] | None:
    try:
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode())
            if header.get("key") != key:
                return None
            data = np.frombuffer(fh.read(), dtype="<f8")
    except (OSError, ValueError):
        return None
    sizes = [int(np.prod(s)) for s in shapes]
    if data.size != sum(sizes):
        return None
    out, pos = [], 0
    for shape, size in zip(shapes, sizes):
        out.append(data[pos : pos + size].reshape(shape).copy())
        pos += size
    return out


def _cache_store(path: Path, key: dict, arrays) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(f".tmp{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write((json.dumps({"key": key, "shapes": [list(a.shape) for a in arrays]}) + "\n").encode())
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    os.replace(tmp, path)


def build_interaction_matrix(
    g: Grid,
    ext: ExteriorDatum,
    p: FractionalParameter,
    *,
    pad: int = 4,
    far_order: int = 2,
    far_gauss: int = 10,
    cache_dir: str | os.PathLike | None = None,
) -> InteractionMatrix:
    """Tabulate every interaction the energy needs on grid ``g``.

    Cells of the grid box enlarged by ``pad`` cells that lie outside the
    domain take the exterior phase of their center and interact through the
    exact cell-cell table.  The exterior beyond the enlarged box is integrated
    against each domain cell with a ``far_order`` x ``far_order`` Gauss rule
    over the cell and ``far_gauss``-point angular panels for the rays; its
    relative error is about 1e-5 of the far part with the defaults.

    The cache directory defaults to ``$FRACLUSTER_CACHE_DIR``; caching is off
    when neither is given.
    """
    if pad < 1:
        raise ValueError("pad must be at least one cell")
    NX, NY = g.nx + 2 * pad, g.ny + 2 * pad
    h = g.h
    bx0, by0 = g.origin[0] - pad * h, g.origin[1] - pad * h
    cx = bx0 + (np.arange(NX) + 0.5) * h
    cy = by0 + (np.arange(NY) + 0.5) * h
    centers = np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1)
    in_omega = np.zeros((NX, NY), dtype=bool)
    in_omega[pad : pad + g.nx, pad : pad + g.ny] = g.omega_mask
    phase = ext.phase_of(centers)
    box_labels = np.where(in_omega, -1, phase)
    bad = (~in_omega) & (phase < 0)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        kind = "uncovered by" if phase[i, j] == -1 else "claimed by several phases of"
        raise ValueError(f"exterior cell centered at {tuple(centers[i, j])} is {kind} the exterior datum")

    cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
    key = _cache_key(g, ext, p, pad, far_order, far_gauss)
    cached = None
    path = None
    if cache_dir:
        path = _cache_path(Path(cache_dir), key)
        cached = _cache_load(path, key, [(NX, NY), (g.nx, g.ny, ext.k)])

    if cached is not None:
        table, far = cached
    else:
        table = offset_table(NX, NY, p, h)
        far = np.zeros((g.nx, g.ny, ext.k))
        idx = g.interior_indices()
        if len(idx):
            outside = Complement(box_polygon(bx0, by0, bx0 + NX * h, by0 + NY * h))
            regions = [Intersection((ext.region(l), outside)) for l in range(ext.k)]
            u, w = _gl01(far_order)
            U, V = np.meshgrid(u, u, indexing="ij")
            ox = g.origin[0] + idx[:, 0] * h
            oy = g.origin[1] + idx[:, 1] * h
            pts = np.stack([ox[:, None] + h * U.ravel(), oy[:, None] + h * V.ravel()], axis=-1)
            phi = point_potentials(pts.reshape(-1, 2), regions, p, n_gauss=far_gauss).reshape(len(idx), -1, ext.k)
            wts = (h * h) * np.outer(w, w).ravel()
            far[idx[:, 0], idx[:, 1]] = np.einsum("npk,p->nk", phi, wts)
        if path is not None:
            _cache_store(path, key, [table, far])

    tail = 0.0
    if math.isfinite(p.r_cut):
        diam = math.sqrt(2.0) * h
        tail = g.n_interior * h * h * (2 * math.pi / p.s) * max(p.r_cut - diam, 1e-300) ** -p.s

    T0 = table.copy()
    T0[0, 0] = 0.0
    top = np.concatenate([T0[:0:-1, :0:-1], T0[:0:-1, :]], axis=1)
    bottom = np.concatenate([T0[:, :0:-1], T0], axis=1)
    K = np.concatenate([top, bottom], axis=0)
    onehot = np.stack([(box_labels == l).astype(float) for l in range(ext.k)], axis=-1)
    ext_arr = np.zeros((g.nx, g.ny, ext.k))
    for l in range(ext.k):
        full = signal.convolve(onehot[..., l], K, mode="full")
        # full[(NX-1) + i, (NY-1) + j] is the sum at box index (i, j)
        ext_arr[..., l] = full[NX - 1 + pad : NX - 1 + pad + g.nx, NY - 1 + pad : NY - 1 + pad + g.ny]
    ext_arr += far
    ext_arr[~g.omega_mask] = 0.0
    return InteractionMatrix(g, ext, p, pad, table, box_labels, far, ext_arr, tail)
