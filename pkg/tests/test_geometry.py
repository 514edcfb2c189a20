import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracluster.geometry import (
    Complement,
    Disk,
    ExteriorDatum,
    HalfPlane,
    Intersection,
    Plane,
    Polygon,
    Sector,
    Union,
    box_polygon,
    build_grid,
    datum_from_dict,
    halfplane_datum,
    region_contains,
    region_from_dict,
    steiner_exterior_datum,
    steiner_halfplane_datum,
)

REGIONS = [
    HalfPlane((0.6, 0.8), 0.3),
    Sector((0.1, -0.2), 0.4, 2.9),
    Sector((0.0, 0.0), 1.0, 1.0 + 4.5),
    Polygon(((0, 0), (2, 0), (1, 0.5), (2, 2), (0, 1.5))),
    Disk((0.3, 0.1), 0.8),
    Intersection((Disk((0, 0), 1.0), HalfPlane((1.0, 0.0), 0.2))),
    Union((box_polygon(-1, -1, 0, 0), Disk((0.5, 0.5), 0.4))),
    Complement(Sector((0, 0), 0.0, 2.0)),
]


def test_basic_membership():
    assert region_contains(HalfPlane((1.0, 0.0), 0.5), (0.7, 3.0))
    assert not region_contains(HalfPlane((1.0, 0.0), 0.5), (0.2, 3.0))
    assert region_contains(Sector((0, 0), 0.0, math.pi / 2), (1.0, 1.0))
    assert not region_contains(Sector((0, 0), 0.0, math.pi / 2), (-1.0, 1.0))
    assert region_contains(Disk((1, 1), 0.5), (1.2, 1.2))
    assert region_contains(box_polygon(0, 0, 1, 2), (0.5, 1.5))
    assert not region_contains(box_polygon(0, 0, 1, 2), (1.5, 1.5))
    assert region_contains(Plane(), (1e9, -3.0))
    assert not region_contains(Polygon(), (0.0, 0.0))


def test_sector_wraps_through_zero_angle():
    s = Sector((0, 0), -0.5, 0.5)
    assert region_contains(s, (1.0, 0.0))
    assert region_contains(s, (1.0, -0.3))
    assert not region_contains(s, (-1.0, 0.0))


def test_complement_union_intersection():
    a, b = Disk((0, 0), 1.0), HalfPlane((1.0, 0.0), 0.0)
    pts = np.random.default_rng(3).uniform(-2, 2, size=(500, 2))
    assert np.array_equal(Complement(a).contains(pts), ~a.contains(pts))
    assert np.array_equal(Union((a, b)).contains(pts), a.contains(pts) | b.contains(pts))
    assert np.array_equal(Intersection((a, b)).contains(pts), a.contains(pts) & b.contains(pts))


@pytest.mark.parametrize(
    "bad",
    [
        lambda: HalfPlane((1.0, 1.0), 0.0),
        lambda: Sector((0, 0), 0.0, 0.0),
        lambda: Sector((0, 0), 0.0, 7.0),
        lambda: Polygon(((0, 0), (0, 1), (1, 0))),
        lambda: Polygon(((0, 0), (1, 1), (1, 0), (0, 1))),
        lambda: Polygon(((0, 0), (1, 0))),
        lambda: Disk((0, 0), 0.0),
    ],
)
def test_invalid_regions_rejected(bad):
    with pytest.raises(ValueError):
        bad()


@pytest.mark.parametrize("r", REGIONS, ids=lambda r: type(r).__name__)
def test_dict_round_trip(r):
    back = region_from_dict(r.to_dict())
    pts = np.random.default_rng(0).uniform(-3, 3, size=(400, 2))
    assert np.array_equal(back.contains(pts), r.contains(pts))


def test_unknown_region_type():
    with pytest.raises(ValueError, match="unknown region type"):
        region_from_dict({"type": "ellipse"})


@settings(max_examples=60, deadline=None)
@given(
    idx=st.integers(0, len(REGIONS) - 1),
    ox=st.floats(-2.5, 2.5),
    oy=st.floats(-2.5, 2.5),
    theta=st.floats(0, 2 * math.pi),
)
def test_membership_constant_between_crossings(idx, ox, oy, theta):
    r = REGIONS[idx]
    o = np.array([[ox, oy]])
    d = np.array([[math.cos(theta), math.sin(theta)]])
    t = np.sort(r.crossings(o, d)[0])
    t = t[np.isfinite(t)]
    edges = np.concatenate([[0.0], t, [t[-1] + 10.0 if t.size else 10.0]])
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo < 1e-7:
            continue
        u = lo + (hi - lo) * np.array([0.05, 0.5, 0.95])
        pts = o[0] + u[:, None] * d[0]
        m = r.contains(pts)
        assert m.all() or not m.any()


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-2, 2), y=st.floats(-2, 2))
def test_breaks_many_matches_scalar(x, y):
    for r in REGIONS:
        many = r.breaks_many(np.array([[x, y]]))[0]
        one = np.array(r.angular_breaks((x, y)), dtype=float)
        a = many[np.isfinite(many)]
        b = one[np.isfinite(one)]
        assert a.shape == b.shape
        if a.size == 0:
            continue
        # compare as directions: 0 and 2 pi are the same break
        gap = np.abs(np.angle(np.exp(1j * (a[:, None] - b[None, :]))))
        assert np.all(gap.min(axis=1) < 1e-9) and np.all(gap.min(axis=0) < 1e-9)


def test_steiner_datum_partitions_the_plane():
    ext = steiner_exterior_datum()
    pts = np.random.default_rng(1).normal(size=(4000, 2)) * 3
    assert ext.check_partition(pts) == (0, 0)
    # phase 2 (0-based) contains the positive x axis, phases 0 and 1 are mirror images
    assert ext.phase_of(np.array([5.0, 0.0])) == 2
    assert ext.phase_of(np.array([-1.0, 1.0])) == 0
    assert ext.phase_of(np.array([-1.0, -1.0])) == 1


def test_steiner_halfplane_datum_leaves_central_triangle_uncovered():
    ext = steiner_halfplane_datum()
    assert ext.phase_of(np.array([0.0, 0.0])) == -1
    assert ext.phase_of(np.array([3.0, 0.1])) == 2


def test_halfplane_datum_and_dict():
    ext = halfplane_datum((2.0, 0.0), 0.5)
    assert ext.phase_of(np.array([0.2, 7.0])) == 0
    assert ext.phase_of(np.array([0.8, -7.0])) == 1
    back = datum_from_dict(ext.to_dict())
    pts = np.random.default_rng(2).uniform(-2, 2, size=(200, 2))
    assert np.array_equal(back.phase_of(pts), ext.phase_of(pts))


def test_overlapping_datum_is_flagged_ambiguous():
    ext = ExteriorDatum(((HalfPlane((1.0, 0.0), 0.0),), (HalfPlane((1.0, 0.0), -1.0),)))
    assert ext.phase_of(np.array([0.5, 0.0])) == -2
    assert ext.check_partition(np.array([[0.5, 0.0], [-2.0, 0.0]])) == (1, 1)


def test_build_grid_disk():
    g = build_grid(((-1, -1), (1, 1)), 8, Disk((0, 0), 1.0))
    assert (g.nx, g.ny, g.h) == (8, 8, 0.25)
    assert g.center(0, 0) == (-0.875, -0.875)
    assert not g.omega_mask[0, 0] and g.omega_mask[3, 4]
    assert g.n_interior == int(g.omega_mask.sum()) == len(g.interior_indices())
    assert g.centers().shape == (8, 8, 2)
    assert g.to_dict() == {"origin": [-1.0, -1.0], "h": 0.25, "nx": 8, "ny": 8}


def test_build_grid_rectangle_and_key():
    g = build_grid(((0, 0), (2, 1)), 8, Plane())
    assert (g.nx, g.ny) == (8, 4)
    g2 = build_grid(((0, 0), (2, 1)), 8, Plane())
    assert g.key() == g2.key()
    g3 = build_grid(((0, 0), (2, 1)), 8, box_polygon(0, 0, 1, 1))
    assert g.key() != g3.key()


@pytest.mark.parametrize(
    "args",
    [
        (((0, 0), (1, 1)), 1, Plane()),
        (((0, 0), (0, 1)), 4, Plane()),
        (((0, 0), (1, 0.3)), 4, Plane()),
        (((0, 0), (1, 1)), 4, Disk((5, 5), 0.1)),
    ],
)
def test_build_grid_errors(args):
    with pytest.raises(ValueError):
        build_grid(*args)
