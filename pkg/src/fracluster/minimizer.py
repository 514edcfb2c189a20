"""Single-cell-flip minimization of the weighted cluster energy with fixed exterior phases.

The solver keeps ``Q[a, l]``, the interaction of cell ``a`` with everything
(interior cells and exterior) currently carrying label ``l``.  With
``T_a = sum_l Q[a, l]`` the energy change of relabeling ``a`` from ``i`` to
``j`` is

    (c_j - c_i) T_a - 2 c_j Q[a, j] + 2 c_i Q[a, i],

and after a flip ``Q`` changes by one row of the interaction table.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .energy import Cluster, EnergyBreakdown, check_weights, cluster_energy, one_hot
from .geometry import ExteriorDatum, Grid, Region
from .kernel import FractionalParameter, InteractionMatrix, build_interaction_matrix

__all__ = [
    "SolverConfig",
    "SolveReport",
    "Junction",
    "JunctionReport",
    "DensityRow",
    "flip_delta",
    "nearest_exterior_labels",
    "random_labels",
    "rasterize",
    "minimize_dirichlet",
    "measure_junction",
    "density_check",
    "symmetric_difference_area",
]


@dataclass
class SolverConfig:
    s: float
    weights: tuple[float, ...]
    grid: Grid
    ext: ExteriorDatum
    schedule: str = "greedy"
    T0: float = 0.0
    cooling: float = 0.9
    anneal_sweeps: int = 50
    seed: int = 0
    max_sweeps: int = 500
    restarts: int = 8
    init: str = "nearest"
    quad_tol: float = 1e-10

    def __post_init__(self):
        if self.schedule not in ("greedy", "anneal"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.T0 < 0:
            raise ValueError("T0 must be nonnegative")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling must lie in (0, 1)")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.init not in ("nearest", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        self.weights = tuple(float(c) for c in check_weights(self.weights, self.ext.k))

    def param(self) -> FractionalParameter:
        return FractionalParameter(self.s, quad_tol=self.quad_tol)


@dataclass(frozen=True)
class Junction:
    location: tuple[float, float]
    corners: int


@dataclass(frozen=True)
class JunctionReport:
    junctions: tuple[Junction, ...]
    angles: dict | None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "junctions": [asdict(j) for j in self.junctions],
            "angles": None if self.angles is None else {str(k): v for k, v in self.angles.items()},
            "note": self.note,
        }


@dataclass(frozen=True)
class DensityRow:
    radius: float
    points: int
    min_fraction: float
    max_fraction: float
    note: str = ""


@dataclass
class SolveReport:
    cluster: Cluster
    energy: EnergyBreakdown
    trace: list[float]
    flips: int
    sweeps: int
    restart: int
    restart_energies: list[float]
    junction: JunctionReport | None
    density: list[DensityRow]
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "energy": self.energy.to_dict(),
            "trace": self.trace,
            "flips": self.flips,
            "sweeps": self.sweeps,
            "restart": self.restart,
            "restart_energies": self.restart_energies,
            "junction": None if self.junction is None else self.junction.to_dict(),
            "density": [asdict(r) for r in self.density],
            "wall_time": self.wall_time,
        }


# ---------------------------------------------------------------------------
# incremental energy


def flip_delta(cl: Cluster, cell, new_label: int, c, W: InteractionMatrix) -> float:
    """Energy change of relabeling one domain cell, from one row of the table."""
    i, j = int(cell[0]), int(cell[1])
    g = cl.grid
    if not (0 <= i < g.nx and 0 <= j < g.ny) or not g.omega_mask[i, j]:
        raise ValueError(f"cell {(i, j)} is not in the domain")
    c = check_weights(c, cl.k)
    old = int(cl.labels[i, j])
    if new_label == old:
        raise ValueError("new label equals the current label")
    if not 0 <= new_label < cl.k:
        raise ValueError("label out of range")
    row = W.row(i, j)
    Q = np.array([math.fsum((row * (cl.labels == l)).ravel()) for l in range(cl.k)]) + W.ext[i, j]
    T = Q.sum()
    return float((c[new_label] - c[old]) * T - 2.0 * c[new_label] * Q[new_label] + 2.0 * c[old] * Q[old])


class _State:
    """Labels plus the running interaction sums ``Q`` for fast flips."""

    def __init__(self, labels: np.ndarray, W: InteractionMatrix, c: np.ndarray):
        self.W = W
        self.g = W.grid
        self.c = c
        self.labels = labels.copy()
        onehot = np.stack([(labels == l).astype(float) for l in range(W.k)], axis=-1)
        self.Q = W.correlate(onehot) + W.ext
        self.T = self.Q.sum(axis=-1)

    def deltas(self, i: int, j: int) -> np.ndarray:
        old = self.labels[i, j]
        q = self.Q[i, j]
        return (self.c - self.c[old]) * self.T[i, j] - 2.0 * self.c * q + 2.0 * self.c[old] * q[old]

    def flip(self, i: int, j: int, new: int) -> None:
        old = self.labels[i, j]
        row = self.W.row(i, j)
        self.Q[..., old] -= row
        self.Q[..., new] += row
        self.labels[i, j] = new

    def energy(self) -> float:
        """Total energy from the running sums (for traces; final values are recomputed)."""
        mask = self.g.omega_mask
        lab = self.labels[mask]
        Q = self.Q[mask]
        ext = self.W.ext[mask]
        ca = self.c[lab]
        T = Q.sum(axis=1)
        own = Q[np.arange(len(lab)), lab]
        own_ext = ext[np.arange(len(lab)), lab]
        # pair terms are counted from both ends, exterior terms once
        int_part = ca * (T - ext.sum(axis=1)) + (Q - ext) @ self.c - 2.0 * ca * (own - own_ext)
        ext_part = ca * ext.sum(axis=1) + ext @ self.c - 2.0 * ca * own_ext
        return math.fsum(0.5 * int_part) + math.fsum(ext_part)


def _scale(W: InteractionMatrix, c: np.ndarray) -> float:
    return float(np.max(c) * (W.ext.sum(axis=-1).max() + np.nansum(W.table)))


def _greedy(state: _State, rng: np.random.Generator, max_sweeps: int, tol: float, trace: list[float]) -> tuple[int, int]:
    cells = state.g.interior_indices()
    flips = 0
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        changed = 0
        for n in rng.permutation(len(cells)):
            i, j = cells[n]
            d = state.deltas(i, j)
            best = int(np.argmin(d))
            if d[best] < -tol:
                state.flip(i, j, best)
                changed += 1
        flips += changed
        trace.append(state.energy())
        if not changed:
            break
    return flips, sweeps


def _anneal(state: _State, rng: np.random.Generator, T0: float, cooling: float, n_sweeps: int, trace: list[float]) -> int:
    cells = state.g.interior_indices()
    k = state.W.k
    flips = 0
    temp = T0
    for _ in range(n_sweeps):
        for n in rng.permutation(len(cells)):
            i, j = cells[n]
            old = state.labels[i, j]
            new = int(rng.integers(k - 1))
            new += new >= old
            d = state.deltas(i, j)[new]
            if d < 0 or (temp > 0 and rng.random() < math.exp(-d / temp)):
                state.flip(i, j, new)
                flips += 1
        trace.append(state.energy())
        temp *= cooling
    return flips


# ---------------------------------------------------------------------------
# initializations and rasterization


def rasterize(g: Grid, phases: ExteriorDatum | list[Region]) -> np.ndarray:
    """Label of the region containing each cell center (``-1`` uncovered, ``-2`` ambiguous)."""
    datum = phases if isinstance(phases, ExteriorDatum) else ExteriorDatum(tuple((r,) for r in phases))
    return datum.phase_of(g.centers())


def nearest_exterior_labels(g: Grid, ext: ExteriorDatum) -> np.ndarray:
    """Each domain cell takes the exterior phase closest to its center.

    Where the datum covers the cell center itself that phase is used; other
    cells copy the label of the nearest covered cell center.
    """
    lab = rasterize(g, ext)
    known = lab >= 0
    if not known.any():
        raise ValueError("exterior datum covers no cell center of the grid")
    if not known.all():
        _, (ii, jj) = ndimage.distance_transform_edt(~known, return_indices=True)
        lab = lab[ii, jj]
    lab = lab.astype(np.int64)
    lab[~g.omega_mask] = -1
    return lab


def random_labels(g: Grid, k: int, rng: np.random.Generator) -> np.ndarray:
    lab = rng.integers(k, size=(g.nx, g.ny)).astype(np.int64)
    lab[~g.omega_mask] = -1
    return lab


def minimize_dirichlet(cfg: SolverConfig, W: InteractionMatrix | None = None, *, radii=None) -> SolveReport:
    """Best of ``cfg.restarts`` seeded runs.

    Every run starts from ``cfg.init`` and has its own seeded stream, so with
    the nearest-phase start the runs differ in sweep order (and, when
    annealing, in the accepted moves).  Each run applies the schedule and then
    greedy sweeps until a full sweep makes no strictly improving flip.  Ties
    keep the earliest run.
    """
    t0 = time.perf_counter()
    p = cfg.param()
    if W is None:
        W = build_interaction_matrix(cfg.grid, cfg.ext, p)
    c = np.asarray(cfg.weights)
    tol = 1e-12 * _scale(W, c)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    best = None
    energies = []
    for r, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        if cfg.init == "nearest":
            lab0 = nearest_exterior_labels(cfg.grid, cfg.ext)
        else:
            lab0 = random_labels(cfg.grid, cfg.ext.k, rng)
        state = _State(lab0, W, c)
        trace = [state.energy()]
        flips = 0
        if cfg.schedule == "anneal":
            flips += _anneal(state, rng, cfg.T0, cfg.cooling, cfg.anneal_sweeps, trace)
        f, sweeps = _greedy(state, rng, cfg.max_sweeps, tol, trace)
        flips += f
        cl = Cluster(cfg.grid, state.labels, cfg.ext)
        e = cluster_energy(cl, c, p, W)
        energies.append(e.total)
        if best is None or e.total < best[1].total - tol:
            best = (cl, e, trace, flips, sweeps, r)
    cl, e, trace, flips, sweeps, r = best
    junction = measure_junction(cl, W) if cl.k == 3 else None
    if radii is None:
        radii = [4 * cfg.grid.h, 8 * cfg.grid.h]
    dens = density_check(cl, radii)
    return SolveReport(cl, e, trace, flips, sweeps, r, energies, junction, dens, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# diagnostics


def _full_labels(cl: Cluster, W: InteractionMatrix | None = None, pad: int = 0):
    """Label field on the grid box (plus ``pad`` cells) with exterior phases filled in."""
    g = cl.grid
    if W is not None and pad == W.pad:
        lab = W.box_labels.copy()
        lab[pad : pad + g.nx, pad : pad + g.ny][g.omega_mask] = cl.labels[g.omega_mask]
        return lab, (g.origin[0] - pad * g.h, g.origin[1] - pad * g.h)
    nx, ny = g.nx + 2 * pad, g.ny + 2 * pad
    ox, oy = g.origin[0] - pad * g.h, g.origin[1] - pad * g.h
    cx = ox + (np.arange(nx) + 0.5) * g.h
    cy = oy + (np.arange(ny) + 0.5) * g.h
    lab = cl.ext.phase_of(np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1))
    inner = lab[pad : pad + g.nx, pad : pad + g.ny]
    inner[g.omega_mask] = cl.labels[g.omega_mask]
    return lab, (ox, oy)


def measure_junction(cl: Cluster, W: InteractionMatrix | None = None, *, search_radius: float = 2.0, annulus=(4.0, 12.0)) -> JunctionReport:
    """Locate triple points and fit the three interfaces around a single one.

    A grid corner is a candidate when cells of all three phases have centers
    within ``search_radius`` cells of it.  Adjacent candidates form one
    triple point.  For a single triple point, each interface is fitted by a
    ray from the junction through the midpoints of the cell edges separating
    its two phases, inside the annulus given in cell units.
    """
    if cl.k != 3:
        raise ValueError("junction measurement needs exactly three phases")
    g = cl.grid
    h = g.h
    pad = int(math.ceil(annulus[1])) + 2
    lab, (ox, oy) = _full_labels(cl, None, pad)
    nx, ny = lab.shape
    # corner (I, J) sits at ox + I*h, oy + J*h for I in 0..nx
    rr = int(math.ceil(search_radius))
    offs = [
        (a, b)
        for a in range(-rr, rr)
        for b in range(-rr, rr)
        if (a + 0.5) ** 2 + (b + 0.5) ** 2 <= search_radius**2
    ]
    present = np.zeros((nx + 1, ny + 1, 3), dtype=bool)
    padded = np.full((nx + 2 * rr + 1, ny + 2 * rr + 1), -1, dtype=np.int64)
    padded[rr : rr + nx, rr : rr + ny] = lab
    for a, b in offs:
        # cell (I + a, J + b) relative to corner (I, J)
        win = padded[rr + a : rr + a + nx + 1, rr + b : rr + b + ny + 1]
        for l in range(3):
            present[..., l] |= win == l
    cand = present.all(axis=-1)
    # corners within the grid box proper
    inner = np.zeros_like(cand)
    inner[pad : pad + g.nx + 1, pad : pad + g.ny + 1] = True
    cand &= inner
    groups, n = ndimage.label(cand, structure=np.ones((3, 3)))
    junctions = []
    for gid in range(1, n + 1):
        pts = np.argwhere(groups == gid)
        tight = []
        for I, J in pts:
            four = {padded[rr + I + a, rr + J + b] for a in (-1, 0) for b in (-1, 0)}
            if {0, 1, 2} <= four:
                tight.append((I, J))
        use = np.array(tight if tight else pts, dtype=float)
        loc = (ox + use[:, 0].mean() * h, oy + use[:, 1].mean() * h)
        junctions.append(Junction((float(loc[0]), float(loc[1])), int(len(pts))))
    if len(junctions) != 1:
        note = "no triple point" if not junctions else f"{len(junctions)} triple points"
        return JunctionReport(tuple(junctions), None, note)
    x0, y0 = junctions[0].location
    # interface edge midpoints between horizontally and vertically adjacent cells
    mids, pairs = [], []
    xs = ox + (np.arange(nx) + 0.5) * h
    ys = oy + (np.arange(ny) + 0.5) * h
    a, b = lab[:-1, :], lab[1:, :]
    m = (a != b) & (a >= 0) & (b >= 0)
    I, J = np.nonzero(m)
    mids.append(np.stack([xs[I] + 0.5 * h, ys[J]], axis=-1))
    pairs.append(np.sort(np.stack([a[m], b[m]], axis=-1), axis=-1))
    a, b = lab[:, :-1], lab[:, 1:]
    m = (a != b) & (a >= 0) & (b >= 0)
    I, J = np.nonzero(m)
    mids.append(np.stack([xs[I], ys[J] + 0.5 * h], axis=-1))
    pairs.append(np.sort(np.stack([a[m], b[m]], axis=-1), axis=-1))
    mids = np.concatenate(mids) - (x0, y0)
    pairs = np.concatenate(pairs)
    dist = np.hypot(mids[:, 0], mids[:, 1])
    ring = (dist >= annulus[0] * h) & (dist <= annulus[1] * h)
    rays = {}
    for pi, pj in ((0, 1), (1, 2), (0, 2)):
        sel = ring & (pairs[:, 0] == pi) & (pairs[:, 1] == pj)
        if sel.sum() < 2:
            return JunctionReport(tuple(junctions), None, f"interface {pi}-{pj} not resolved in the annulus")
        P = mids[sel]
        w, v = np.linalg.eigh(P.T @ P)
        d = v[:, -1]
        if (P @ d).mean() < 0:
            d = -d
        rays[(pi, pj)] = math.atan2(d[1], d[0])
    order = sorted(rays.items(), key=lambda kv: kv[1])
    angles = {}
    for n_ in range(3):
        (pa, ta), (pb, tb) = order[n_], order[(n_ + 1) % 3]
        span = (tb - ta) % (2 * math.pi)
        shared = set(pa) & set(pb)
        if len(shared) != 1:
            return JunctionReport(tuple(junctions), None, "interfaces are not in cyclic order")
        angles[shared.pop()] = span
    if len(angles) != 3:
        return JunctionReport(tuple(junctions), None, "interfaces are not in cyclic order")
    return JunctionReport(tuple(junctions), dict(sorted(angles.items())), "")


def density_check(cl: Cluster, radii) -> list[DensityRow]:
    """Volume fractions of the incident phases in balls around interface cells.

    A cell is on an interface when a 4-neighbour (exterior included) has a
    different label.  Balls are discrete: the cells whose centers lie within
    ``r`` of the center; the fraction is normalized by their count.  Balls not
    contained in the domain are skipped.
    """
    g = cl.grid
    h = g.h
    lab, _ = _full_labels(cl, None, 1)
    onehot = np.stack([(lab == l).astype(float) for l in range(cl.k)], axis=-1)
    boundary = np.zeros_like(g.omega_mask)
    inner = lab[1:-1, 1:-1]
    for a, b in ((0, 1), (2, 1), (1, 0), (1, 2)):
        nb = lab[a : a + g.nx, b : b + g.ny]
        boundary |= nb != inner
    boundary &= g.omega_mask
    # distance from each cell center to the nearest center outside the domain
    dist = ndimage.distance_transform_edt(np.pad(g.omega_mask, 1))[1:-1, 1:-1] * h - 0.5 * h
    rows = []
    for r in radii:
        r = float(r)
        ok = boundary & (dist >= r)
        if not ok.any():
            rows.append(DensityRow(r, 0, math.nan, math.nan, "no interface cell with the ball inside the domain"))
            continue
        n = int(math.floor(r / h))
        u = np.arange(-n, n + 1)
        disk = ((u[:, None] ** 2 + u[None, :] ** 2) * h * h <= r * r).astype(float)
        area = disk.sum()
        fr_min, fr_max = math.inf, -math.inf
        for l in range(cl.k):
            frac = ndimage.correlate(onehot[..., l], disk, mode="constant")[1:-1, 1:-1] / area
            # incident phases: the cell's own phase or a neighbour's
            incident = ok & (ndimage.maximum_filter(onehot[..., l], size=3, mode="constant")[1:-1, 1:-1] > 0)
            if incident.any():
                fr_min = min(fr_min, float(frac[incident].min()))
                fr_max = max(fr_max, float(frac[incident].max()))
        rows.append(DensityRow(r, int(ok.sum()), fr_min, fr_max))
    return rows


def symmetric_difference_area(cl: Cluster, reference: np.ndarray, exclude_radius: float = 0.0, center=(0.0, 0.0)) -> float:
    """Area of domain cells whose label differs from ``reference``, outside a ball around ``center``."""
    g = cl.grid
    c = g.centers()
    far = np.hypot(c[..., 0] - center[0], c[..., 1] - center[1]) >= exclude_radius
    diff = g.omega_mask & far & (cl.labels != reference)
    return float(diff.sum()) * g.h * g.h
