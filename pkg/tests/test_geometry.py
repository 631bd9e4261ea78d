import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tracelab.geometry import (Box, DepthExhausted, DyadicCube, Window, children_of, covered_by_union,
                               cube_box, dilate, intersection_measure, overlap_multiplicity,
                               raster_counts)


def brute_covered(target: Box, others, window: Window) -> bool:
    """Walk every lattice point and open lattice cell of the target one by one."""
    L = window.period
    axes = [range(2 * lo + 1, 2 * hi) for lo, hi in zip(target.lo, target.hi)]

    def inside(box, p):
        for lo, hi, x in zip(box.lo, box.hi, p):
            # doubled coordinates; is some translate of (lo, hi) around x?
            if not any(2 * (lo + j * L) < x < 2 * (hi + j * L) for j in range(-3, 4)):
                return False
        return True

    return all(any(inside(b, p) for b in others) for p in itertools.product(*axes))


def real_interval(box: Box):
    return [(Fraction(lo, box.scale), Fraction(hi, box.scale)) for lo, hi in zip(box.lo, box.hi)]


def test_children_one_dimension():
    win = Window(1, 1, 3)
    assert children_of(DyadicCube(0, (0,)), win) == [DyadicCube(1, (0,)), DyadicCube(1, (1,))]


def test_children_two_dimensions():
    win = Window(2, 1, 3)
    kids = children_of(DyadicCube(1, (0, 0)), win)
    assert sorted(c.index for c in kids) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert all(c.level == 2 for c in kids)


def test_children_refuse_below_depth():
    win = Window(1, 1, 2)
    with pytest.raises(DepthExhausted):
        children_of(DyadicCube(2, (0,)), win)


def test_dilate_doubles_side():
    win = Window(1, 2, 3)
    assert real_interval(dilate(DyadicCube(1, (0,)), win)) == [(Fraction(-1, 4), Fraction(3, 4))]


def test_dilate_half_extra():
    win = Window(1, 2, 3, k0=1)
    assert real_interval(dilate(DyadicCube(0, (0,)), win)) == [(Fraction(-1, 4), Fraction(5, 4))]


def test_dilate_is_concentric():
    win = Window(2, 2, 4, k0=2)
    c = DyadicCube(3, (5, 2))
    lo, hi = dilate(c, win).real_bounds()
    np.testing.assert_allclose(0.5 * (lo + hi), c.center())
    np.testing.assert_allclose(hi - lo, (1 + 0.25) / 8)


def test_intersection_of_neighbouring_dilations():
    win = Window(1, 2, 3)
    a = dilate(DyadicCube(1, (0,)), win)
    b = dilate(DyadicCube(1, (1,)), win)
    assert intersection_measure(a, b, win) == Fraction(1, 2)


def test_disjoint_cubes_have_zero_intersection():
    win = Window(2, 2, 3)
    a = cube_box(DyadicCube(2, (0, 0)), win)
    b = cube_box(DyadicCube(2, (1, 0)), win)
    assert intersection_measure(a, b, win) == 0


@pytest.mark.parametrize("n", [1, 2])
def test_self_intersection_of_unit_dilation(n):
    win = Window(n, 2, 2)
    a = dilate(DyadicCube(0, (0,) * n), win)
    assert intersection_measure(a, a, win) == 2 ** n


def test_intersection_wraps_periodically():
    win = Window(1, 2, 2)
    a = dilate(DyadicCube(1, (0,)), win)  # (-1/4, 3/4)
    b = dilate(DyadicCube(1, (3,)), win)  # (5/4, 9/4) lifts to (-3/4, 1/4)
    assert intersection_measure(a, b, win) == Fraction(1, 2)


@pytest.mark.parametrize("x, expected", [(0.4, 2), (0.5, 1)])
def test_overlap_multiplicity_of_unit_dilations(x, expected):
    win = Window(1, 2, 2)
    family = [dilate(c, win) for c in win.cubes_at(0)]
    assert overlap_multiplicity([x], family, win) == expected


def test_uniform_unit_tiling_has_no_redundant_dilation():
    win = Window(1, 2, 2)
    boxes = [dilate(c, win) for c in win.cubes_at(0)]
    assert covered_by_union(boxes[0], boxes[1:], win) is False


def test_target_inside_larger_box_is_covered():
    win = Window(1, 2, 3)
    small = dilate(DyadicCube(3, (3,)), win)
    big = dilate(DyadicCube(0, (0,)), win)
    assert covered_by_union(small, [big], win) is True


def test_union_of_two_halves_covers_except_seam():
    win = Window(1, 1, 2)
    target = cube_box(DyadicCube(0, (0,)), win)
    halves = [cube_box(c, win) for c in win.cubes_at(1)]
    # the midpoint lies in neither open half
    assert covered_by_union(target, halves, win) is False
    assert brute_covered(target, halves, win) is False


def random_boxes(rng, win, count, kmax):
    boxes = []
    for _ in range(count):
        k = int(rng.integers(0, kmax + 1))
        m = tuple(int(v) for v in rng.integers(0, win.cells_per_axis(k), win.n))
        c = DyadicCube(k, m)
        boxes.append(dilate(c, win) if rng.random() < 0.7 else cube_box(c, win))
    return boxes


@pytest.mark.parametrize("n, k0", [(1, 0), (1, 1), (2, 0), (2, 1)])
def test_coverage_agrees_with_brute_force(n, k0):
    rng = np.random.default_rng(100 + 10 * n + k0)
    win = Window(n, 2, 3, k0)
    for _ in range(60 if n == 1 else 25):
        target, *others = random_boxes(rng, win, int(rng.integers(2, 9)), 3)
        assert covered_by_union(target, others, win) == brute_covered(target, others, win)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2), st.integers(0, 7), st.integers(0, 1))
def test_raster_counts_match_pointwise_multiplicity(k, i, k0):
    win = Window(1, 2, 2, k0)
    i = i % win.cells_per_axis(k)
    family = [dilate(DyadicCube(k, (i,)), win), dilate(DyadicCube(0, (1,)), win)]
    counts = raster_counts(family, win, 1)
    L2 = counts.shape[0]
    for p in range(0, L2, 3):
        x = Fraction(p, 2 * win.scale)
        assert counts[p] == overlap_multiplicity([x], family, win)
