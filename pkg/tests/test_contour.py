import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ductscan.contour import Contour, contour_area, trace_contours
from ductscan.raster import BinaryImage

import oracles


def test_single_pixel():
    bits = np.zeros((7, 7), dtype=bool)
    bits[3, 3] = True
    cs = trace_contours(BinaryImage(bits))
    assert len(cs) == 1
    assert cs[0].points.tolist() == [[3, 3]]
    assert not cs[0].is_hole


def test_square_with_centre_hole():
    bits = np.zeros((9, 9), dtype=bool)
    bits[2:7, 2:7] = True
    bits[4, 4] = False
    cs = trace_contours(bits)
    outer = [i for i, c in enumerate(cs) if not c.is_hole]
    holes = [i for i, c in enumerate(cs) if c.is_hole]
    assert len(outer) == 1 and len(holes) == 1
    oi, hi = outer[0], holes[0]
    assert cs[hi].parent == oi
    assert cs[oi].children == [hi]
    assert oracles.component_count(bits) == 1 and oracles.hole_count(bits) == 1


def test_empty_image():
    assert len(trace_contours(np.zeros((5, 5), dtype=bool))) == 0


def test_square_area_is_81():
    bits = np.zeros((14, 14), dtype=bool)
    bits[2:12, 2:12] = True
    (c,) = trace_contours(bits).contours
    assert contour_area(c) == 81.0


def test_hole_area_is_negative():
    bits = np.zeros((12, 12), dtype=bool)
    bits[1:11, 1:11] = True
    bits[3:8, 3:8] = False
    cs = trace_contours(bits)
    (hole,) = [c for c in cs if c.is_hole]
    assert contour_area(hole) < 0


def test_degenerate_and_reversed_area():
    assert contour_area(Contour(np.array([[4, 4]]), False)) == 0.0
    bits = np.zeros((10, 10), dtype=bool)
    bits[2:7, 1:9] = True
    (c,) = trace_contours(bits).contours
    rev = Contour(c.points[::-1].copy(), c.is_hole)
    assert contour_area(rev) == -contour_area(c)
    assert abs(contour_area(c)) > 0


def test_component_touching_the_frame():
    bits = np.ones((4, 6), dtype=bool)
    cs = trace_contours(bits)
    assert len(cs) == 1 and contour_area(cs[0]) == 15.0


def test_nested_rings_hierarchy():
    bits = np.zeros((20, 20), dtype=bool)
    bits[1:19, 1:19] = True
    bits[3:17, 3:17] = False
    bits[6:14, 6:14] = True
    bits[8:12, 8:12] = False
    cs = trace_contours(bits)
    depth = {}
    for i, c in enumerate(cs):
        d, p = 0, c.parent
        while p is not None:
            d, p = d + 1, cs[p].parent
        depth[i] = (d, c.is_hole)
    assert sorted(depth.values()) == [(0, False), (1, True), (2, False), (3, True)]


masks = arrays(np.bool_, st.tuples(st.integers(1, 32), st.integers(1, 32)))


@settings(max_examples=150, deadline=None)
@given(masks)
def test_counts_match_flood_fill(mask):
    cs = trace_contours(mask)
    assert sum(not c.is_hole for c in cs) == oracles.component_count(mask)
    assert sum(c.is_hole for c in cs) == oracles.hole_count(mask)


@settings(max_examples=100, deadline=None)
@given(masks)
def test_contours_are_closed_8_connected_cycles(mask):
    for c in trace_contours(mask):
        p = c.points
        d = np.abs(np.diff(np.vstack([p, p[:1]]), axis=0))
        assert d.max(initial=0) <= 1
        assert all(mask[y, x] for x, y in p)


@settings(max_examples=100, deadline=None)
@given(masks)
def test_hierarchy_is_a_consistent_forest(mask):
    cs = trace_contours(mask)
    for i, c in enumerate(cs):
        if c.is_hole:
            assert c.parent is not None and not cs[c.parent].is_hole
        if c.parent is not None:
            assert i in cs[c.parent].children
        for k in c.children:
            assert cs[k].parent == i
        seen, p = set(), c.parent
        while p is not None:
            assert p not in seen
            seen.add(p)
            p = cs[p].parent


@settings(max_examples=100, deadline=None)
@given(masks)
def test_every_border_pixel_lies_on_a_contour(mask):
    padded = np.pad(mask, 1)
    border = mask & ~(
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    on_contour = np.zeros_like(mask)
    for c in trace_contours(mask):
        on_contour[c.points[:, 1], c.points[:, 0]] = True
    assert np.array_equal(border & ~on_contour, np.zeros_like(mask))


@settings(max_examples=30, deadline=None)
@given(masks)
def test_tracing_is_deterministic(mask):
    a, b = trace_contours(mask), trace_contours(mask.copy())
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert np.array_equal(x.points, y.points) and x.parent == y.parent
