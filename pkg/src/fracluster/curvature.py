"""Fractional curvature H_s(x, E) = PV int (chi_{E^c}(y) - chi_E(y)) |x - y|^-(2+s) dy.

The integral is taken over ``eps < |y - x| < r_cut`` in polar coordinates about
``x``.  Along every ray the signed indicator is piecewise constant, so the
radial integral is a finite sum of ``t^-s / s`` terms.  The angular integral
uses panels split at every direction where the crossing pattern changes,
including the two tangent directions at ``x``.  The divergent ``eps^-s`` parts
therefore cancel to rounding at boundary points with a straight tangent cone.
Estimates for ``eps0, eps0/2, eps0/4`` are combined by Richardson
extrapolation with the exponent ``1 - s`` of the leading curvature term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import Cluster
from .geometry import Complement, HalfPlane, Region, Sector, _as_points
from .kernel import FractionalParameter, _smooth_rule

__all__ = [
    "CurvatureQuery",
    "CurvatureResult",
    "PixelPhase",
    "fractional_curvature",
    "curvature_scaling_check",
    "sector_boundary_curvature",
]


@dataclass(frozen=True)
class CurvatureQuery:
    """Where to evaluate: an analytic ``region`` or phase ``phase`` of ``cluster``."""

    x: tuple[float, float]
    region: Region | None = None
    cluster: Cluster | None = None
    phase: int | None = None
    eps: float | None = None
    r_cut: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        if (self.region is None) == (self.cluster is None):
            raise ValueError("give exactly one of region or (cluster, phase)")
        if self.cluster is not None and self.phase is None:
            raise ValueError("a cluster query needs a phase")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("excision radius must be positive")
        if not self.r_cut > 0:
            raise ValueError("r_cut must be positive")


@dataclass(frozen=True)
class CurvatureResult:
    value: float
    error_bar: float
    estimates: tuple[tuple[float, float], ...]
    center: tuple[float, float]
    tail: float = 0.0

    def __float__(self):
        return self.value

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "error_bar": self.error_bar,
            "estimates": [list(e) for e in self.estimates],
            "center": list(self.center),
            "tail": self.tail,
        }


class PixelPhase(Region):
    """Phase ``i`` of a cluster as a planar set: labeled cells inside the domain, the datum outside."""

    def __init__(self, cl: Cluster, phase: int):
        if not 0 <= phase < cl.k:
            raise IndexError("phase out of range")
        self.cl = cl
        self.phase = phase
        self.outer = cl.ext.region(phase)
        g = cl.grid
        self.x0, self.y0 = g.origin
        self.x1 = self.x0 + g.nx * g.h
        self.y1 = self.y0 + g.ny * g.h

    def _cell_index(self, p):
        g = self.cl.grid
        i = np.floor((p[..., 0] - self.x0) / g.h).astype(np.int64)
        j = np.floor((p[..., 1] - self.y0) / g.h).astype(np.int64)
        inside = (i >= 0) & (i < g.nx) & (j >= 0) & (j < g.ny)
        ic = np.clip(i, 0, g.nx - 1)
        jc = np.clip(j, 0, g.ny - 1)
        in_omega = inside & g.omega_mask[ic, jc]
        return ic, jc, in_omega

    def contains(self, points):
        p = _as_points(points)
        ic, jc, in_omega = self._cell_index(p)
        return np.where(in_omega, self.cl.labels[ic, jc] == self.phase, self.outer.contains(p))

    def crossings(self, origins, dirs):
        g = self.cl.grid
        out = [self.outer.crossings(origins, dirs)]
        ox, oy = origins[..., 0:1], origins[..., 1:2]
        ex, ey = dirs[..., 0:1], dirs[..., 1:2]
        xs = self.x0 + g.h * np.arange(g.nx + 1)
        ys = self.y0 + g.h * np.arange(g.ny + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            tx = (xs - ox) / ex
            ty = (ys - oy) / ey
            yx = oy + tx * ey
            xy = ox + ty * ex
        tx = np.where((yx >= self.y0) & (yx <= self.y1) & (tx >= 0) & np.isfinite(tx), tx, np.inf)
        ty = np.where((xy >= self.x0) & (xy <= self.x1) & (ty >= 0) & np.isfinite(ty), ty, np.inf)
        out += [tx, ty]
        return np.concatenate(out, axis=-1)

    def breaks_many(self, points):
        return self.outer.breaks_many(points)

    def angular_breaks(self, x):
        return self.outer.angular_breaks(x)


def _tangent_breaks(region: Region, x, delta: float, n: int = 720) -> list[float]:
    """Directions where membership at radius ``delta`` changes, refined by bisection."""
    th = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    pts = np.stack([x[0] + delta * np.cos(th), x[1] + delta * np.sin(th)], axis=-1)
    inside = region.contains(pts)
    out = []
    for k in np.nonzero(inside != np.roll(inside, -1))[0]:
        a, b = th[k], th[k] + 2 * math.pi / n
        ia = inside[k]
        for _ in range(50):
            m = 0.5 * (a + b)
            im = bool(region.contains(np.array([x[0] + delta * math.cos(m), x[1] + delta * math.sin(m)])))
            if im == ia:
                a = m
            else:
                b = m
        out.append(0.5 * (a + b))
    return out


def _signed_ray_sums(region: Region, x, s: float, eps_list, r_cut: float, breaks, n_gauss: int, max_panel: float):
    """``int dtheta sum_segments sigma (max(lo,eps)^-s - max(hi,eps)^-s)/s`` for each eps."""
    psi, wt = _smooth_rule(n_gauss)
    br = np.concatenate([np.arange(0.0, 2 * math.pi, max_panel), np.mod(np.asarray(breaks, dtype=float), 2 * math.pi)])
    br = np.unique(br[np.isfinite(br)])
    edges = np.append(br, 2 * math.pi + br[0]) if br.size else np.array([0.0, 2 * math.pi])
    lo, hi = edges[:-1], edges[1:]
    width = hi - lo
    th = (lo[:, None] + width[:, None] * psi).ravel()
    wts = (width[:, None] * wt).ravel()
    dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
    org = np.broadcast_to(np.asarray(x, dtype=float), dirs.shape)
    t = region.crossings(org, dirs)
    scale = max(1.0, math.hypot(*x))
    t = np.where(t > 1e-12 * scale, t, np.inf)
    t = np.sort(t, axis=-1)
    t_lo = np.concatenate([np.zeros((len(th), 1)), t], axis=-1)
    t_hi = np.concatenate([t, np.full((len(th), 1), np.inf)], axis=-1)
    valid = np.isfinite(t_lo) & (t_hi > t_lo)
    mid = np.where(np.isfinite(t_hi), 0.5 * (t_lo + t_hi), t_lo + np.maximum(t_lo, 1.0))
    mid = np.where(valid, mid, 1.0)
    # the first segment starts at x itself; sample it just beyond the smallest radius used
    first = np.minimum(0.5 * t_hi[:, 0], 0.5 * min(eps_list))
    mid[:, 0] = np.where(np.isfinite(first), first, 1.0)
    samples = org[:, None, :] + mid[..., None] * dirs[:, None, :]
    sigma = np.where(region.contains(samples), -1.0, 1.0) * valid
    out = []
    for eps in eps_list:
        a = np.clip(t_lo, eps, r_cut)
        b = np.clip(t_hi, eps, r_cut)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(b > a, (a**-s - b**-s) / s, 0.0)
        out.append(float(((sigma * g).sum(axis=-1) * wts).sum()))
    return out


def _adaptive_ray_sum(region, x, s, eps, r_cut, breaks, n, max_panel, tol, n_max=768):
    """Signed ray sum at one excision radius, doubling the angular order until it settles.

    The radial clip at ``eps`` kinks the angular integrand where the
    eps-circle meets the boundary, so those directions join the breaks.
    """
    br = list(breaks) + _tangent_breaks(region, x, eps)
    prev = _signed_ray_sums(region, x, s, [eps], r_cut, br, n, max_panel)[0]
    while n < n_max:
        n *= 2
        cur = _signed_ray_sums(region, x, s, [eps], r_cut, br, n, max_panel)[0]
        if abs(cur - prev) <= 0.1 * tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    return prev


def _cone_tail(region: Region, x, s: float, r_cut: float) -> tuple[float, float]:
    """Signed contribution beyond ``r_cut`` for cones, from the angular deficit."""
    if not math.isfinite(r_cut):
        return 0.0, 0.0
    sector = region.part if isinstance(region, Complement) else region
    sign = -1.0 if isinstance(region, Complement) else 1.0
    if isinstance(sector, HalfPlane):
        opening, vertex = math.pi, None
    elif isinstance(sector, Sector):
        opening, vertex = sector.opening, sector.vertex
    else:
        # generic bounded or unbounded region: bound only
        return 0.0, (2 * math.pi / s) * r_cut**-s
    deficit = (2 * math.pi - opening) - opening
    tail = sign * deficit * r_cut**-s / s
    dist = 0.0 if vertex is None else math.dist(x, vertex)
    err = abs(tail) * min(1.0, 2.0 * dist / r_cut) + (0.0 if vertex is not None else 0.0)
    return tail, err


def _fit_interface(cl: Cluster, phase: int, x, window: int = 5):
    """Line through the interface of ``phase`` near ``x``: returns (point on line, unit direction)."""
    g = cl.grid
    h = g.h
    reg = PixelPhase(cl, phase)
    i = int(math.floor((x[0] - g.origin[0]) / h))
    j = int(math.floor((x[1] - g.origin[1]) / h))
    half = window // 2
    cx = g.origin[0] + (np.arange(i - half - 1, i + half + 2) + 0.5) * h
    cy = g.origin[1] + (np.arange(j - half - 1, j + half + 2) + 0.5) * h
    C = np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1)
    inside = reg.contains(C)
    mids = []
    a, b = inside[:-1, :], inside[1:, :]
    I, J = np.nonzero(a != b)
    mids += [np.stack([cx[I] + 0.5 * h, cy[J]], axis=-1)]
    a, b = inside[:, :-1], inside[:, 1:]
    I, J = np.nonzero(a != b)
    mids += [np.stack([cx[I], cy[J] + 0.5 * h], axis=-1)]
    P = np.concatenate(mids)
    if len(P) < 2:
        raise ValueError("x is not on the boundary of the phase (no interface in the window)")
    c0 = P.mean(axis=0)
    _, v = np.linalg.eigh((P - c0).T @ (P - c0))
    d = v[:, -1]
    return c0, d


def _richardson(vals, eps_list, s):
    p = 1.0 - s
    f = 2.0**p
    r1 = (f * vals[1] - vals[0]) / (f - 1.0)
    r2 = (f * vals[2] - vals[1]) / (f - 1.0)
    return r2, abs(r2 - r1)


def fractional_curvature(
    q: CurvatureQuery,
    p,
    *,
    tol: float = 1e-6,
    n_gauss: int = 24,
    max_panel: float = math.pi / 8,
) -> CurvatureResult:
    """Principal-value fractional curvature with an error bar.

    For a cluster phase the interface near ``x`` is replaced by the line
    fitted to the label interface in a 5-cell window; ``x`` is projected onto
    it and the half-plane inside the excised ball contributes nothing.  The
    pixel field is used outside the ball, with ``eps0 = 4h`` by default.
    Its error bar is the spread over the three excision radii and does not
    include the pixelization error, which is of order ten percent on a
    64-cell disk of radius 16 cells.
    """
    s = p.s if isinstance(p, FractionalParameter) else float(p)
    x = q.x
    if q.region is not None:
        region = q.region
        center = x
        delta = 1e-9 * max(1.0, math.hypot(*x))
        probe = _tangent_breaks(region, x, delta, n=64)
        if not probe:
            raise ValueError(f"point {x} is not on the boundary of the region")
        breaks = list(region.angular_breaks(x)) + _tangent_breaks(region, x, delta)
        eps0 = q.eps if q.eps is not None else 1e-3 * max(1.0, math.hypot(*x))
    else:
        cl = q.cluster
        region = PixelPhase(cl, q.phase)
        c0, d = _fit_interface(cl, q.phase, x)
        rel = np.asarray(x) - c0
        center = tuple(float(v) for v in c0 + (rel @ d) * d)
        normal = math.atan2(d[0], -d[1])
        breaks = list(region.angular_breaks(center)) + [normal + math.pi / 2, normal - math.pi / 2]
        eps0 = q.eps if q.eps is not None else 4.0 * cl.grid.h
    eps_list = [eps0, eps0 / 2.0, eps0 / 4.0]
    # the radial clip at eps kinks the angular integrand where the eps-circle meets the boundary
    vals = [_adaptive_ray_sum(region, center, s, e, q.r_cut, breaks, n_gauss, max_panel, tol) for e in eps_list]
    if q.cluster is not None:
        # the fitted half-plane fills the excised ball: no extrapolation below the pixel scale
        value = vals[0]
        err = max(abs(vals[1] - vals[0]), abs(vals[2] - vals[1]))
    else:
        value, err = _richardson(vals, eps_list, s)
        if err > 10.0 * tol * max(1.0, abs(value)):
            raise ArithmeticError(f"excision extrapolation did not converge: estimates {vals}")
    tail, tail_err = _cone_tail(region, center, s, q.r_cut) if q.region is not None else (0.0, 0.0)
    return CurvatureResult(
        float(value + tail),
        float(err + tail_err),
        tuple(zip(eps_list, vals)),
        tuple(float(v) for v in center),
        float(tail),
    )


def curvature_scaling_check(E: Region, x, lam: float, s: float, **kw) -> tuple[float, float]:
    """``(H_s(x, E), lam^s H_s(lam x, E))`` for a cone ``E`` with vertex at the origin."""
    x = tuple(float(v) for v in x)
    if x == (0.0, 0.0):
        raise ValueError("x must differ from the vertex")
    h1 = fractional_curvature(CurvatureQuery(x, region=E), s, **kw).value
    xl = (lam * x[0], lam * x[1])
    h2 = fractional_curvature(CurvatureQuery(xl, region=E), s, **kw).value
    return h1, lam**s * h2


def sector_boundary_curvature(alpha: float, s: float, **kw) -> float:
    """H_s at the point ``(1, 0)`` of the boundary of the sector ``{0 <= arg < alpha}``."""
    return fractional_curvature(CurvatureQuery((1.0, 0.0), region=Sector((0.0, 0.0), 0.0, alpha)), s, **kw).value
