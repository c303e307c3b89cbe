import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.ndimage import label

from helpers import brute_point_polyline, even_odd_inside
from lanegrid.geometry import (
    GeometryError,
    Polyline,
    Ring,
    interpolate_polyline,
    max_spacing,
    min_point_distance,
    offset_ring,
    offset_step,
    point_in_ring,
    point_polyline_distance,
    ring_area_ha,
    segment_intersects,
    thin_points,
)

SQUARE = np.array([(0, 0), (100, 0), (100, 100), (0, 100)], dtype=float)


# --------------------------------------------------------------------------
# max_spacing
# --------------------------------------------------------------------------


@pytest.mark.parametrize(
    "w, eps, expected",
    [(36, 0.99, 72 * math.sqrt(0.0199)), (18, 0.99, 36 * math.sqrt(0.0199)), (36, 1.0, 0.0), (36, 0.0, 72.0)],
)
def test_max_spacing_examples(w, eps, expected):
    assert max_spacing(w, eps) == pytest.approx(expected, abs=1e-12)


def test_max_spacing_matches_floored_grids():
    assert 10.15 < max_spacing(36, 0.99) < 10.16
    assert 5.07 < max_spacing(18, 0.99) < 5.08


@pytest.mark.parametrize("w, eps", [(0, 0.5), (-1, 0.5), (36, 1.01), (36, -0.1), (math.nan, 0.5), (36, math.nan)])
def test_max_spacing_rejects_bad_input(w, eps):
    with pytest.raises(GeometryError):
        max_spacing(w, eps)


@pytest.mark.parametrize("eps", [0.5, 0.9, 0.99])
def test_max_spacing_clearance_property(eps):
    # any point at least w from both ends of a chord of length d keeps eps*w
    # from the chord itself
    w = 36.0
    d = max_spacing(w, eps)
    a, b = np.array([0.0, 0.0]), np.array([d, 0.0])
    t = np.linspace(0, 2 * math.pi, 2001)
    ring_a = a + w * np.column_stack([np.cos(t), np.sin(t)])
    ring_b = b + w * np.column_stack([np.cos(t), np.sin(t)])
    pts = np.vstack([ring_a, ring_b])
    keep = (np.hypot(*(pts - a).T) >= w - 1e-9) & (np.hypot(*(pts - b).T) >= w - 1e-9)
    dist = brute_point_polyline(pts[keep], np.array([a, b]))
    assert dist.min() >= eps * w - 1e-6


# --------------------------------------------------------------------------
# interpolate_polyline
# --------------------------------------------------------------------------


def test_interpolate_exact_division():
    out = interpolate_polyline(np.array([(0, 0), (10, 0)], float), 5)
    np.testing.assert_allclose(out, [(0, 0), (5, 0), (10, 0)])


def test_interpolate_uneven_division():
    out = interpolate_polyline(np.array([(0, 0), (10, 0)], float), 4)
    np.testing.assert_allclose(out, [(0, 0), (10 / 3, 0), (20 / 3, 0), (10, 0)])


def test_interpolate_identity_when_fine_enough():
    pts = np.array([(0, 0), (1, 0), (1, 1), (2, 1)], float)
    np.testing.assert_array_equal(interpolate_polyline(pts, 5), pts)


def test_interpolate_closed_ring_wraps():
    out = interpolate_polyline(Polyline(SQUARE, closed=True), 50)
    assert len(out) == 8
    np.testing.assert_allclose(out[-1], (0, 50))


def test_interpolate_rejects_degenerate():
    with pytest.raises(GeometryError):
        interpolate_polyline(np.array([(0, 0), (0, 0)], float), 1)
    with pytest.raises(GeometryError):
        interpolate_polyline(np.array([(0, 0), (1, 0)], float), 0)


coords = st.floats(-500, 500, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(
    pts=st.lists(st.tuples(coords, coords), min_size=2, max_size=12),
    d=st.floats(0.5, 80),
)
def test_interpolate_properties(pts, d):
    pts = np.array(pts)
    step = np.hypot(*np.diff(pts, axis=0).T)
    if np.any(step <= 1e-6):
        return
    out = interpolate_polyline(pts, d)
    gaps = np.hypot(*np.diff(out, axis=0).T)
    assert gaps.max() <= d + 1e-9
    # every input vertex survives, in order: walk the output once
    j = 0
    for p in pts:
        while j < len(out) and not np.array_equal(out[j], p):
            j += 1
        assert j < len(out)
    assert gaps.sum() == pytest.approx(step.sum(), rel=1e-6)
    # inserted points lie on the original polyline
    assert brute_point_polyline(out, pts).max() <= 1e-6


# --------------------------------------------------------------------------
# offset_step
# --------------------------------------------------------------------------


@pytest.mark.parametrize(
    "a, b, w, theta, q",
    [
        ((0, 0), (2, 0), 1, 0.0, (1, 1)),
        ((0, 0), (0, 2), 1, math.pi / 2, (-1, 1)),
        ((0, 0), (1, 1), math.sqrt(2), math.pi / 4, (-0.5, 1.5)),
        ((2, 0), (0, 0), 1, math.pi, (1, -1)),
    ],
)
def test_offset_step_examples(a, b, w, theta, q):
    th, pt = offset_step(a, b, w)
    assert th == pytest.approx(theta)
    np.testing.assert_allclose(pt, q, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(a=st.tuples(coords, coords), b=st.tuples(coords, coords), w=st.floats(0.1, 100))
def test_offset_step_left_and_exact(a, b, w):
    a, b = np.array(a), np.array(b)
    if np.hypot(*(b - a)) < 1e-3:
        return
    _, q = offset_step(a, b, w)
    mid = 0.5 * (a + b)
    assert np.hypot(*(q - mid)) == pytest.approx(w, abs=1e-9 * max(1.0, w))
    cross = (b - a)[0] * (q - mid)[1] - (b - a)[1] * (q - mid)[0]
    assert cross > 0


def test_offset_step_rejects_coincident_points():
    with pytest.raises(GeometryError):
        offset_step((1, 1), (1, 1), 1)


# --------------------------------------------------------------------------
# Ring and offset_ring
# --------------------------------------------------------------------------


def test_ring_normalizes_orientation_and_closure():
    cw = np.vstack([SQUARE[::-1], SQUARE[-1:]])
    r = Ring(cw)
    assert r.area == pytest.approx(10_000)
    assert len(r) == 4


def test_ring_rejects_bowtie():
    with pytest.raises(GeometryError):
        Ring(np.array([(0, 0), (1, 1), (1, 0), (0, 1)], float))


def test_offset_square_inward():
    rings = offset_ring(Ring(SQUARE), 18, "inward")
    assert len(rings) == 1
    minx, miny, maxx, maxy = rings[0].polygon.bounds
    assert (minx, miny, maxx, maxy) == pytest.approx((18, 18, 82, 82), abs=1e-9)
    assert rings[0].area == pytest.approx(64 * 64, rel=1e-9)


def test_offset_64gon_inward_matches_circle():
    t = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    ring = Ring(np.column_stack([100 * np.cos(t), 100 * np.sin(t)]))
    (inner,) = offset_ring(ring, 18, "inward")
    radii = np.hypot(*inner.points.T)
    assert np.all(np.abs(radii - 82) <= 0.5)


def dumbbell() -> Ring:
    return Ring(
        np.array(
            [(0, 0), (60, 0), (60, 25), (100, 25), (100, 0), (160, 0), (160, 60), (100, 60), (100, 35), (60, 35), (60, 60), (0, 60)],
            float,
        )
    )


def test_offset_dumbbell_splits_like_distance_field():
    ring = dumbbell()
    rings = offset_ring(ring, 18, "inward")
    assert len(rings) == 2
    # oracle: raster of the signed distance field at 0.5 m; count components
    xs = np.arange(0.25, 160, 0.5)
    ys = np.arange(0.25, 60, 0.5)
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    inside = np.array([even_odd_inside(p, ring.points) for p in pts])
    dist = brute_point_polyline(pts, ring.points, closed=True)
    mask = (inside & (dist > 18)).reshape(X.shape)
    _, n = label(mask)
    assert n == len(rings)


@pytest.mark.parametrize("direction", ["inward", "outward"])
def test_offset_ring_clearance(direction):
    ring = dumbbell() if direction == "inward" else Ring(np.array([(0, 0), (10, 0), (10, 10), (0, 10)], float))
    for out in offset_ring(ring, 18, direction, spacing=5.0):
        d = brute_point_polyline(out.points, ring.points, closed=True)
        assert np.all(np.abs(d - 18) <= 0.1)


def test_offset_round_trip_convex():
    # dilation followed by erosion (a morphological closing) is exact on
    # convex rings; the reverse order rounds every convex corner
    t = np.linspace(0, 2 * math.pi, 9, endpoint=False)
    ring = Ring(np.column_stack([200 * np.cos(t), 120 * np.sin(t)]))
    (outer,) = offset_ring(ring, 20, "outward", spacing=10)
    (back,) = offset_ring(outer, 20, "inward", spacing=10)
    assert brute_point_polyline(back.points, ring.points, closed=True).max() <= 0.1
    assert brute_point_polyline(ring.points, back.points, closed=True).max() <= 0.1


def test_offset_ring_vanishes():
    assert offset_ring(Ring(np.array([(0, 0), (30, 0), (30, 30), (0, 30)], float)), 15, "inward") == []


def test_offset_ring_bad_arguments():
    with pytest.raises(GeometryError):
        offset_ring(Ring(SQUARE), 0, "inward")
    with pytest.raises(GeometryError):
        offset_ring(Ring(SQUARE), 1, "sideways")


# --------------------------------------------------------------------------
# Predicates and measures
# --------------------------------------------------------------------------


def test_point_in_ring_boundary_counts_inside():
    ring = Ring(SQUARE)
    assert point_in_ring((50, 50), ring)
    assert point_in_ring((100, 50), ring)
    assert point_in_ring((0, 0), ring)
    assert not point_in_ring((100 + 1e-6, 50), ring)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-20, 180), y=st.floats(-20, 80))
def test_point_in_ring_agrees_with_shapely(x, y):
    ring = dumbbell()
    poly = ring.polygon
    if poly.exterior.distance(shapely.Point(x, y)) < 1e-6:
        return
    assert point_in_ring((x, y), ring) == poly.contains(shapely.Point(x, y))


@pytest.mark.parametrize(
    "seg_a, seg_b, expected",
    [
        (((0, 0), (2, 2)), ((0, 2), (2, 0)), True),
        (((0, 0), (1, 0)), ((1, 0), (2, 5)), True),
        (((0, 0), (2, 0)), ((1, 0), (3, 0)), True),
        (((0, 0), (1, 0)), ((2, 0), (3, 0)), False),
        (((0, 0), (1, 1)), ((0, 1), (0.4, 0.6)), False),
    ],
)
def test_segment_intersects_cases(seg_a, seg_b, expected):
    assert segment_intersects(*seg_a, *seg_b) is expected
    assert segment_intersects(*seg_b, *seg_a) is expected


@settings(max_examples=200, deadline=None)
@given(p=st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=4, max_size=4))
def test_segment_intersects_agrees_with_shapely(p):
    a1, a2, b1, b2 = [np.array(q, float) for q in p]
    if np.array_equal(a1, a2) or np.array_equal(b1, b2):
        return
    ref = shapely.LineString([a1, a2]).intersects(shapely.LineString([b1, b2]))
    assert segment_intersects(a1, a2, b1, b2) == ref


def test_min_point_distance():
    assert min_point_distance((0, 0), np.array([(3, 4), (6, 8)], float)) == pytest.approx(5)
    assert min_point_distance((0, 0), np.zeros((0, 2))) == math.inf


def test_point_polyline_distance_matches_oracle():
    rng = np.random.default_rng(3)
    line = rng.uniform(0, 100, size=(15, 2))
    pts = rng.uniform(-20, 120, size=(50, 2))
    np.testing.assert_allclose(point_polyline_distance(pts, line), brute_point_polyline(pts, line), atol=1e-9)


def test_ring_area_ha():
    assert ring_area_ha(Ring(np.array([(0, 0), (200, 0), (200, 150), (0, 150)], float))) == pytest.approx(3.0)


def test_thin_points_keeps_ends_and_gap():
    pts = np.column_stack([np.array([0, 0.5, 1.0, 3.0, 3.2, 6.0, 6.1]), np.zeros(7)])
    out = thin_points(pts, 1.0)
    assert out[0, 0] == 0 and out[-1, 0] == 6.1
    assert np.all(np.diff(out[:, 0]) >= 1.0)
