"""Stationary three-phase cones: the sector function F, its inverse, and angle solvers.

``F(alpha) = 2 int_0^alpha int_0^inf rho / (1 + rho^2 + 2 rho cos t)^(1+s/2) drho dt``
is the interaction of the point ``(1, 0)`` with a sector of opening ``2 alpha``
symmetric about the negative axis.  The inner integral has the closed form
``1/s - cos t * sin(t)^(-1-s) * S(t)`` with ``S(t) = int_0^t sin(u)^s du``, and
integrating in ``t`` once more gives

    F(alpha) = (2 / s) * S(alpha) / sin(alpha)^s,

where ``S`` is an incomplete beta function.  ``f_alpha`` uses this closed form;
``f_alpha_quad`` evaluates the double integral directly and serves as the
cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, interpolate, optimize, special

__all__ = [
    "ConeAngles",
    "FTable",
    "f_alpha",
    "f_alpha_quad",
    "f_inverse",
    "solve_weighted_cone",
    "stationarity_residual",
    "classical_weighted_angles",
]

TWO_PI = 2.0 * math.pi
_SUM_TOL = 1e-10


def _check_s(s: float) -> float:
    s = float(s)
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    return s


def _sin_power_integral(alpha: float, s: float) -> float:
    """``int_0^alpha sin(u)^s du`` for ``0 <= alpha <= pi``."""
    a = 0.5 * (1.0 + s)
    full = special.beta(a, 0.5)
    if alpha <= 0.5 * math.pi:
        return 0.5 * full * special.betainc(a, 0.5, math.sin(alpha) ** 2)
    return full - 0.5 * full * special.betainc(a, 0.5, math.sin(math.pi - alpha) ** 2)


def f_alpha(alpha: float, s: float) -> float:
    """The sector function F(alpha) for ``0 <= alpha < pi``; strictly increasing, F(0) = 0."""
    s = _check_s(s)
    alpha = float(alpha)
    if alpha < 0.0:
        raise ValueError("alpha must be nonnegative")
    if alpha >= math.pi:
        raise ValueError("F diverges as alpha -> pi; alpha must be < pi")
    if alpha == 0.0:
        return 0.0
    sin_a = math.sin(alpha)
    if alpha < 1e-6:
        # S(a) / sin(a)^s ~ a / (1+s) for tiny angles
        return 2.0 / s * alpha / (1.0 + s)
    return 2.0 / s * _sin_power_integral(alpha, s) / sin_a**s


def f_alpha_quad(alpha: float, s: float, tol: float = 1e-10) -> float:
    """F(alpha) by adaptive quadrature of the defining double integral.

    The radial integral is split at ``rho = 2``; the tail is mapped by
    ``u = 1/rho`` to ``[0, 1/2]`` where the integrand is ``u^(s-1)`` times a
    smooth factor, handled by an algebraic-weight rule.
    """
    s = _check_s(s)
    if alpha >= math.pi:
        raise ValueError("alpha must be < pi")
    if alpha == 0.0:
        return 0.0
    e = 1.0 + 0.5 * s

    def inner(t):
        c = math.cos(t)
        head, _ = integrate.quad(lambda r: r / (1.0 + r * r + 2.0 * r * c) ** e, 0.0, 2.0, epsabs=tol * 1e-2, epsrel=1e-13, limit=200)
        tail, _ = integrate.quad(
            lambda u: 1.0 / (u * u + 2.0 * u * c + 1.0) ** e,
            0.0,
            0.5,
            weight="alg",
            wvar=(s - 1.0, 0.0),
            epsabs=tol * 1e-2,
            epsrel=1e-13,
            limit=200,
        )
        return head + tail

    val, _ = integrate.quad(inner, 0.0, alpha, epsabs=tol, epsrel=1e-12, limit=200)
    return 2.0 * val


@dataclass(frozen=True)
class FTable:
    """Samples of F on ``[0, pi - eps]`` with a monotone interpolant, used to bracket inverses."""

    s: float
    alpha: np.ndarray
    values: np.ndarray

    @classmethod
    def build(cls, s: float, n: int = 513, eps: float = 1e-3) -> "FTable":
        s = _check_s(s)
        # cluster samples toward pi where F blows up
        u = np.linspace(0.0, 1.0, n)
        alpha = (math.pi - eps) * (1.0 - (1.0 - u) ** 2)
        values = np.array([f_alpha(a, s) for a in alpha])
        if not np.all(np.diff(values) > 0):
            raise ArithmeticError("F samples are not strictly increasing")
        alpha.setflags(write=False)
        values.setflags(write=False)
        return cls(s, alpha, values)

    def interpolant(self):
        return interpolate.PchipInterpolator(self.values, self.alpha)

    def bracket(self, v: float) -> tuple[float, float] | None:
        """An interval of angles containing ``F^-1(v)``, or None beyond the table."""
        i = int(np.searchsorted(self.values, v))
        if i == 0:
            return (0.0, float(self.alpha[0]))
        if i >= len(self.values):
            return None
        return (float(self.alpha[i - 1]), float(self.alpha[i]))


_TABLES: dict[float, FTable] = {}


def _table(s: float) -> FTable:
    t = _TABLES.get(s)
    if t is None:
        t = FTable.build(s)
        _TABLES[s] = t
    return t


def f_inverse(v: float, s: float, table: FTable | None = None) -> float:
    """The angle ``alpha`` in ``[0, pi)`` with ``F(alpha) = v``, by bisection."""
    s = _check_s(s)
    v = float(v)
    if v < 0.0:
        raise ValueError("F takes only nonnegative values")
    if v == 0.0:
        return 0.0
    tab = table if table is not None else _table(s)
    br = tab.bracket(v)
    if br is None:
        lo = float(tab.alpha[-1])
        gap = math.pi - lo
        hi = lo
        while f_alpha(hi, s) < v:
            lo = hi
            gap *= 0.5
            hi = math.pi - gap
            if gap < 1e-300:
                raise OverflowError(f"F^-1({v}) is closer to pi than floating point resolves")
    else:
        lo, hi = br
    if f_alpha(hi, s) == v:
        return hi
    return optimize.bisect(lambda a: f_alpha(a, s) - v, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)


@dataclass(frozen=True)
class ConeAngles:
    """Opening angles of the three phases of a cone; they add to 2 pi."""

    alpha: tuple[float, float, float]

    def __post_init__(self):
        a = tuple(float(x) for x in self.alpha)
        if len(a) != 3:
            raise ValueError("a three-phase cone has three angles")
        if any(not 0.0 < x < math.pi for x in a):
            raise ValueError(f"each angle must lie in (0, pi), got {a}")
        if abs(math.fsum(a) - TWO_PI) > _SUM_TOL:
            raise ValueError(f"angles must add to 2 pi, got {math.fsum(a)}")
        object.__setattr__(self, "alpha", a)

    def degrees(self) -> tuple[float, float, float]:
        return tuple(math.degrees(x) for x in self.alpha)


def _weights3(c) -> tuple[float, float, float]:
    c = tuple(float(x) for x in c)
    if len(c) != 3:
        raise ValueError("exactly three weights are required")
    if any(not x > 0 for x in c):
        raise ValueError("weights must be positive")
    return c


def solve_weighted_cone(c, s: float) -> ConeAngles:
    """The unique stationary cone for weights ``c``.

    Solves ``g(k) = sum_i F^-1(k / c_i) - pi = 0`` by bisection on a bracket
    grown geometrically; the angles are ``alpha_i = pi - F^-1(k / c_i)``.
    """
    c = _weights3(c)
    s = _check_s(s)
    tab = _table(s)

    def g(k):
        return math.fsum(f_inverse(k / ci, s, tab) for ci in c) - math.pi

    lo, hi = 0.0, min(c)
    while g(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
    k = optimize.bisect(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=400)
    beta = [f_inverse(k / ci, s, tab) for ci in c]
    return ConeAngles(tuple(math.pi - b for b in beta))


def stationarity_residual(a: ConeAngles, c, s: float) -> tuple[float, float, float]:
    """``(r12, r23, r31)`` with ``r_ij = c_i F(pi - alpha_i) - c_j F(pi - alpha_j)``."""
    c = _weights3(c)
    t = [ci * f_alpha(math.pi - ai, s) for ci, ai in zip(c, a.alpha)]
    return (t[0] - t[1], t[1] - t[2], t[2] - t[0])


def classical_weighted_angles(c) -> ConeAngles:
    """Angles satisfying ``sin(alpha_i) / (c_j + c_h)`` equal for all i, with sum 2 pi.

    These are the exterior angles ``alpha_i = pi - gamma_i`` of the triangle with
    sides ``w_i = c_j + c_h``, where ``gamma_i`` is opposite ``w_i``.  Such a
    triangle exists for all positive weights because ``w_i < w_j + w_h``
    reduces to ``0 < 2 c_i``.
    """
    c = _weights3(c)
    total = math.fsum(c)
    w = [total - ci for ci in c]
    gam = []
    for i in range(3):
        wi, wj, wh = w[i], w[(i + 1) % 3], w[(i + 2) % 3]
        cos_g = (wj * wj + wh * wh - wi * wi) / (2.0 * wj * wh)
        gam.append(math.acos(max(-1.0, min(1.0, cos_g))))
    # absorb rounding so the angles add to 2 pi
    drift = math.fsum(gam) - math.pi
    gam = [g - drift / 3.0 for g in gam]
    if any(not g > 0.0 for g in gam):
        raise ValueError("weights admit no cone with all angles below pi")
    return ConeAngles(tuple(math.pi - g for g in gam))
