import math

import numpy as np
import pytest
from scipy import special

from fracluster.cones import f_alpha
from fracluster.curvature import (
    CurvatureQuery,
    CurvatureResult,
    PixelPhase,
    curvature_scaling_check,
    fractional_curvature,
    sector_boundary_curvature,
)
from fracluster.energy import Cluster
from fracluster.geometry import (
    Complement,
    Disk,
    ExteriorDatum,
    HalfPlane,
    Sector,
    box_polygon,
    build_grid,
    halfplane_datum,
)
from fracluster.minimizer import rasterize


@pytest.mark.parametrize("x", [(0.5, 0.0), (0.5, 3.0), (0.5, -7.5), (0.5, 1e-3), (0.5, 40.0)])
def test_half_plane_has_zero_curvature(x):
    r = fractional_curvature(CurvatureQuery(x, region=HalfPlane((1.0, 0.0), 0.5)), 0.6)
    assert abs(r.value) < 1e-6


def test_tilted_half_plane():
    n = (math.cos(0.7), math.sin(0.7))
    x = (0.3 * n[0] - 2.0 * n[1], 0.3 * n[1] + 2.0 * n[0])
    assert abs(fractional_curvature(CurvatureQuery(x, region=HalfPlane(n, 0.3)), 0.4).value) < 1e-6


@pytest.mark.parametrize("alpha", [math.pi / 2, 2 * math.pi / 3, math.pi + 0.2, 3 * math.pi / 2])
def test_sign_law(alpha):
    h = sector_boundary_curvature(alpha, 0.5)
    assert math.copysign(1.0, h) == math.copysign(1.0, math.pi - alpha)
    assert abs(h) > 1e-3


@pytest.mark.parametrize("s", [0.3, 0.7])
@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_scaling_identity(s, lam):
    E = Sector((0.0, 0.0), 0.0, 2.0)
    h1, h2 = curvature_scaling_check(E, (1.3, 0.0), lam, s)
    assert h2 == pytest.approx(h1, rel=1e-5)


def test_scaling_check_rejects_vertex():
    with pytest.raises(ValueError):
        curvature_scaling_check(Sector((0.0, 0.0), 0.0, 2.0), (0.0, 0.0), 2.0, 0.5)


@pytest.mark.parametrize("alpha,s", [(math.pi / 2, 0.5), (2 * math.pi / 3, 0.8), (2.0, 0.3), (4.0, 0.6)])
def test_curvature_matches_f_of_supplement(alpha, s):
    h = sector_boundary_curvature(alpha, s)
    ref = f_alpha(math.pi - alpha, s) if alpha < math.pi else -f_alpha(alpha - math.pi, s)
    assert abs(h - ref) <= 1e-4 * max(1.0, abs(ref))


def test_complement_flips_sign():
    E = Sector((0.0, 0.0), 0.0, 2.2)
    x = (1.5 * math.cos(2.2), 1.5 * math.sin(2.2))
    a = fractional_curvature(CurvatureQuery(x, region=E), 0.5).value
    b = fractional_curvature(CurvatureQuery(x, region=Complement(E)), 0.5).value
    assert a + b == pytest.approx(0.0, abs=1e-8 * max(1.0, abs(a)))


@pytest.mark.parametrize("s,R", [(0.5, 1.0), (0.3, 2.0)])
def test_disk_closed_form(s, R):
    # H_s on the circle of radius R: 2^(1-s) / s * B(1/2, (1-s)/2) * R^-s
    ref = 2 ** (1 - s) / s * special.beta(0.5, 0.5 * (1 - s)) * R**-s
    r = fractional_curvature(CurvatureQuery((R, 0.0), region=Disk((0.0, 0.0), R)), s)
    assert r.value == pytest.approx(ref, rel=1e-5)
    assert r.error_bar < 1e-4 * ref


def test_finite_cutoff_on_half_plane_is_still_zero():
    r = fractional_curvature(CurvatureQuery((0.0, 0.0), region=HalfPlane((0.0, 1.0), 0.0), r_cut=3.0), 0.5)
    assert abs(r.value) < 1e-8


def test_point_off_the_boundary():
    with pytest.raises(ValueError, match="not on the boundary"):
        fractional_curvature(CurvatureQuery((0.0, 0.0), region=Disk((0.0, 0.0), 1.0)), 0.5)


def test_result_serialization():
    r = fractional_curvature(CurvatureQuery((1.0, 0.0), region=Disk((0.0, 0.0), 1.0)), 0.5)
    assert isinstance(r, CurvatureResult)
    d = r.to_dict()
    assert d["value"] == float(r) and len(d["estimates"]) == 3


@pytest.mark.parametrize(
    "kw",
    [
        {},
        {"region": Disk((0, 0), 1.0), "cluster": object()},
        {"region": Disk((0, 0), 1.0), "eps": 0.0},
        {"region": Disk((0, 0), 1.0), "r_cut": 0.0},
    ],
)
def test_query_validation(kw):
    with pytest.raises(ValueError):
        CurvatureQuery((1.0, 0.0), **kw)


@pytest.fixture(scope="module")
def flat_cluster():
    g = build_grid(((0, 0), (1, 1)), 16, box_polygon(0, 0, 1, 1))
    ext = halfplane_datum((1.0, 0.0), 0.5)
    return Cluster(g, rasterize(g, ext), ext)


def test_pixel_phase_membership(flat_cluster):
    ph = PixelPhase(flat_cluster, 0)
    pts = np.array([[0.2, 0.5], [0.8, 0.5], [-3.0, 9.0], [4.0, 0.0]])
    assert ph.contains(pts).tolist() == [True, False, True, False]


def test_grid_flat_interface_has_zero_curvature(flat_cluster):
    for phase in (0, 1):
        r = fractional_curvature(CurvatureQuery((0.5, 0.5), cluster=flat_cluster, phase=phase), 0.5)
        assert r.center == pytest.approx((0.5, 0.5))
        assert abs(r.value) < 1e-6


def test_grid_query_away_from_interface(flat_cluster):
    with pytest.raises(ValueError, match="not on the boundary"):
        fractional_curvature(CurvatureQuery((0.1, 0.5), cluster=flat_cluster, phase=0), 0.5)


def test_grid_disk_is_positive():
    g = build_grid(((-1, -1), (1, 1)), 64, box_polygon(-1, -1, 1, 1))
    ext = ExteriorDatum(((Complement(Disk((0, 0), 0.5)),), (Disk((0, 0), 0.5),)))
    cl = Cluster(g, rasterize(g, ext), ext)
    s = 0.5
    r = fractional_curvature(CurvatureQuery((0.5, 0.0), cluster=cl, phase=1), s)
    ref = 2 ** (1 - s) / s * special.beta(0.5, 0.5 * (1 - s)) * 0.5**-s
    assert r.value > 0
    assert r.value == pytest.approx(ref, rel=0.25)
