"""Relative fractional perimeters of pixel clusters and the weighted cluster energy.

For a phase ``E`` the perimeter relative to the domain is

    Per_s(E; Omega) = J_s(E ∩ Omega, R^2 \\ E) + J_s(Omega \\ E, E \\ Omega),

so only pairs with at least one point in the domain contribute.  On a grid
this splits into interior-interior pairs with different labels, interior
cells against exterior phases other than their own, and interior cells of
other labels against the exterior part of ``E``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .geometry import ExteriorDatum, Grid
from .kernel import FractionalParameter, InteractionMatrix, build_interaction_matrix

__all__ = [
    "Cluster",
    "EnergyBreakdown",
    "check_weights",
    "one_hot",
    "perimeter_s",
    "cluster_energy",
    "scaled_energy",
    "strip_scaled_perimeter",
    "OMEGA_1",
    "extrapolate_to_one",
]


@dataclass(frozen=True, eq=False)
class Cluster:
    """Phase labels ``0..k-1`` on the domain cells of ``grid``; the exterior follows ``ext``.

    ``labels`` has the grid's ``(nx, ny)`` shape; entries outside the domain
    are stored as ``-1``.
    """

    grid: Grid
    labels: np.ndarray = field(repr=False)
    ext: ExteriorDatum

    def __post_init__(self):
        lab = np.array(self.labels, dtype=np.int64)
        g = self.grid
        if lab.shape != (g.nx, g.ny):
            raise ValueError(f"labels shape {lab.shape} != grid shape {(g.nx, g.ny)}")
        if self.ext.k < 2:
            raise ValueError("a cluster needs at least two phases")
        inner = lab[g.omega_mask]
        if inner.size and (inner.min() < 0 or inner.max() >= self.ext.k):
            raise ValueError(f"domain labels must lie in 0..{self.ext.k - 1}")
        lab[~g.omega_mask] = -1
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def k(self) -> int:
        return self.ext.k

    def with_labels(self, labels) -> "Cluster":
        return Cluster(self.grid, labels, self.ext)

    def interior_labels(self) -> np.ndarray:
        return self.labels[self.grid.omega_mask]


def check_weights(c, k: int) -> np.ndarray:
    c = np.asarray(c, dtype=float).ravel()
    if c.size != k:
        raise ValueError(f"expected {k} weights, got {c.size}")
    if not np.all(c > 0):
        raise ValueError("weights must be positive")
    return c


def one_hot(cl: Cluster) -> np.ndarray:
    """``(nx, ny, k)`` indicator of each label, zero outside the domain."""
    return np.stack([(cl.labels == l).astype(float) for l in range(cl.k)], axis=-1)


@dataclass(frozen=True)
class EnergyBreakdown:
    per_phase: tuple[float, ...]
    weights: tuple[float, ...]
    total: float
    scaled: float
    s: float
    tail_bound: float = 0.0

    def to_dict(self) -> dict:
        return {
            "per_phase": list(self.per_phase),
            "weights": list(self.weights),
            "total": self.total,
            "scaled": self.scaled,
            "s": self.s,
            "tail_bound": self.tail_bound,
        }


def _matrix(cl: Cluster, p, W: InteractionMatrix | None) -> InteractionMatrix:
    if W is None:
        param = p if isinstance(p, FractionalParameter) else FractionalParameter(float(p))
        return build_interaction_matrix(cl.grid, cl.ext, param)
    if W.grid is not cl.grid and W.grid.key() != cl.grid.key():
        raise ValueError("interaction table was built for a different grid")
    return W


def _phase_terms(cl: Cluster, W: InteractionMatrix) -> list[float]:
    mask = cl.grid.omega_mask
    lab = cl.labels[mask]
    M = W.correlate(one_hot(cl))[mask]
    ext = W.ext[mask]
    tot_int = M.sum(axis=1)
    tot_ext = ext.sum(axis=1)
    out = []
    for i in range(cl.k):
        mine = lab == i
        terms = np.concatenate(
            [
                tot_int[mine] - M[mine, i],
                tot_ext[mine] - ext[mine, i],
                ext[~mine, i],
            ]
        )
        out.append(max(math.fsum(terms), 0.0))
    return out


def perimeter_s(cl: Cluster, i: int, p, W: InteractionMatrix | None = None) -> float:
    """Per_s of phase ``i`` relative to the domain."""
    if not 0 <= i < cl.k:
        raise IndexError(f"phase {i} out of range 0..{cl.k - 1}")
    return _phase_terms(cl, _matrix(cl, p, W))[i]


def cluster_energy(cl: Cluster, c, p, W: InteractionMatrix | None = None) -> EnergyBreakdown:
    """Weighted sum of the phase perimeters with its ``(1 - s)`` scaling."""
    c = check_weights(c, cl.k)
    W = _matrix(cl, p, W)
    per = _phase_terms(cl, W)
    total = math.fsum(ci * pi for ci, pi in zip(c, per))
    s = W.param.s
    return EnergyBreakdown(tuple(per), tuple(float(x) for x in c), total, (1.0 - s) * total, s, W.tail_bound)


def scaled_energy(e: EnergyBreakdown, p=None) -> float:
    """``(1 - s) * total``; ``p`` overrides the exponent stored in ``e``."""
    s = e.s if p is None else (p.s if isinstance(p, FractionalParameter) else float(p))
    return (1.0 - s) * e.total


def strip_scaled_perimeter(s: float, L: float = 1.0) -> float:
    """``(1 - s)`` times the interaction across a flat interface, per unit length, within depth ``L``.

    Integrating the kernel along the interface direction leaves
    ``c_s (a + b)^(-1-s)`` with ``c_s = B(1/2, (1+s)/2)``, and the two normal
    coordinates over ``(0, L)^2`` give ``L^(1-s) (2 - 2^(1-s)) / (s (1-s))``.
    As ``s -> 1`` the result tends to ``B(1/2, 1) = 2``, the constant that
    multiplies the interface length in the limit energy.
    """
    s = float(s)
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    c = special.beta(0.5, 0.5 * (1.0 + s))
    return c * L ** (1.0 - s) * (2.0 - 2.0 ** (1.0 - s)) / s


OMEGA_1 = float(special.beta(0.5, 1.0))


def extrapolate_to_one(s_values, scaled, degree: int = 2) -> float:
    """Value at ``s = 1`` of a least-squares polynomial in ``1 - s`` through ``(s, scaled)``."""
    x = 1.0 - np.asarray(s_values, dtype=float)
    y = np.asarray(scaled, dtype=float)
    if x.size <= degree:
        raise ValueError(f"need more than {degree} points for a degree-{degree} fit")
    return float(np.polynomial.polynomial.polyfit(x, y, degree)[0])
