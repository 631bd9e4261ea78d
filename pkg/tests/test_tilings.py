import itertools
import warnings
from fractions import Fraction

import numpy as np
import pytest

from tracelab.functions import CallableFunction, ZeroFunction
from tracelab.geometry import DyadicCube, Window, cube_box, dilate, overlap_multiplicity
from tracelab.tilings import (BLUE, Tiling, TilingSystem, TruncationWarning,
                              build_admissible_system, build_lj_sequence, build_raw_stages,
                              check_admissible, cover_properties, random_tiling, select_cover,
                              succession_holds, validate_tiling)
from tracelab.weights import (ConstantWeight, PowerWeight, StepPowerWeight, WeightScales,
                              q_parameters)

from test_geometry import brute_covered


def tiles_by_volume(cubes, window) -> bool:
    """Independent check: no cube contains another and the volumes add up."""
    cubes = list(cubes)
    total = sum(Fraction(1, 2 ** (c.level * window.n)) for c in cubes)
    if total != window.M ** window.n:
        return False
    seen = set(cubes)
    for c in cubes:
        for lev in range(c.level):
            if DyadicCube(lev, tuple(m >> (c.level - lev) for m in c.index)) in seen:
                return False
    return len(seen) == len(cubes)


def test_uniform_family_is_a_tiling():
    win = Window(2, 2, 3)
    assert validate_tiling(win.cubes_at(2), win).valid


def test_missing_cube_is_reported():
    win = Window(2, 2, 3)
    cubes = list(win.cubes_at(2))[1:]
    diag = validate_tiling(cubes, win)
    assert not diag.valid and "gap" in diag.message


@pytest.mark.parametrize("n", [1, 2])
def test_random_tilings_validate(n):
    rng = np.random.default_rng(n)
    win = Window(n, 2, 4)
    for _ in range(20):
        t = random_tiling(win, rng)
        assert validate_tiling(t.cubes, win).valid
        assert tiles_by_volume(t.cubes, win)
    # a random family of mixed levels is only valid when it really tiles
    for _ in range(30):
        cubes = [DyadicCube(k, tuple(rng.integers(0, win.cells_per_axis(k), n)))
                 for k in rng.integers(0, 3, 6)]
        assert validate_tiling(cubes, win).valid == tiles_by_volume(cubes, win)


def test_uniform_tiling_keeps_every_cube():
    win = Window(2, 2, 3)
    t = Tiling.uniform(win, 2)
    assert select_cover(t, win) == t.cubes


def test_small_cube_inside_coarse_dilation_is_dropped():
    win = Window(1, 2, 3)
    cubes = [DyadicCube(1, (0,)), DyadicCube(3, (4,)), DyadicCube(3, (5,)), DyadicCube(2, (3,)),
             DyadicCube(1, (2,)), DyadicCube(1, (3,))]
    assert validate_tiling(cubes, win).valid
    kept = select_cover(Tiling(win, cubes), win)
    assert DyadicCube(3, (4,)) not in kept


@pytest.mark.parametrize("n, k0", [(1, 0), (1, 1), (2, 0), (2, 1)])
def test_selection_against_brute_force(n, k0):
    rng = np.random.default_rng(20 + n + k0)
    win = Window(n, 2, 3 if n == 2 else 4, k0)
    for _ in range(6):
        t = random_tiling(win, rng)
        kept = select_cover(t, win)
        boxes = {c: dilate(c, win) for c in t.cubes}
        survivors = [boxes[c] for c in kept]
        # the survivors cover the whole window
        for cell in itertools.product(range(win.M), repeat=n):
            assert brute_covered(cube_box(DyadicCube(0, cell), win), survivors, win)
        # no survivor is covered by the others
        for i, c in enumerate(kept):
            assert not brute_covered(boxes[c], survivors[:i] + survivors[i + 1:], win)


@pytest.mark.parametrize("n", [1, 2])
def test_multiplicity_bound_at_lattice_points(n):
    rng = np.random.default_rng(5)
    win = Window(n, 1, 3)
    bound = (n + 1) * 2 ** n
    for _ in range(3):
        kept = select_cover(random_tiling(win, rng), win)
        boxes = [dilate(c, win) for c in kept]
        pts = np.arange(0, 16) / 16
        for p in itertools.product(pts, repeat=n):
            assert overlap_multiplicity(p, boxes, win) <= bound


@pytest.mark.parametrize("n, k0", [(1, 0), (1, 1), (2, 0), (2, 1)])
def test_cover_properties_hold(n, k0):
    rng = np.random.default_rng(7)
    win = Window(n, 2, 4, k0)
    for _ in range(5):
        props = cover_properties(select_cover(random_tiling(win, rng), win), win)
        assert props.all_ok, props


def test_zero_function_schedule_steps_by_one():
    win = Window(1, 1, 6)
    s = build_lj_sequence(ZeroFunction(1), ConstantWeight(), win, 5)
    assert s.levels == [0, 1, 2, 3, 4]


def test_time_independent_function_halves_each_level():
    win = Window(1, 1, 5)
    f = CallableFunction(lambda x, t: 1 + 0.5 * np.cos(2 * np.pi * x[:, 0]), 1)
    s = build_lj_sequence(f, ConstantWeight(), win, 5)
    assert s.levels == [0, 1, 2, 3, 4]


def test_function_away_from_boundary_jumps_to_level_one():
    def bump(x, t):
        inside = (t > 0.5) & (t < 1.0)
        tt = np.where(inside, t, 0.75)
        return np.where(inside, np.exp(-1 / ((tt - 0.5) * (1 - tt))), 0.0) * np.ones(len(x))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        s = build_lj_sequence(CallableFunction(bump, 1), ConstantWeight(), Window(1, 1, 4), 3)
    assert s.levels[1] == 1


def test_schedule_truncation_warns():
    with pytest.warns(TruncationWarning):
        s = build_lj_sequence(ZeroFunction(1), ConstantWeight(), Window(1, 1, 2), 6)
    assert s.truncated and s.levels == [0, 1, 2]


def test_unit_weight_raw_stages_are_uniform_yellow():
    win = Window(2, 1, 4)
    scales = WeightScales(ConstantWeight(), win)
    stages, brackets = build_raw_stages(scales, win, [0, 1, 3, 4], 64.0)
    assert not brackets
    for stage, k in zip(stages, [0, 1, 3, 4]):
        assert sorted(stage.cubes) == sorted(win.cubes_at(k))
        assert BLUE not in stage.colors.values()


def test_power_weight_paints_blue_near_large_averages():
    win = Window(1, 2, 6)
    scales = WeightScales(PowerWeight(0.75), win)
    stages, brackets = build_raw_stages(scales, win, [0, 6], 2.0)
    blue = [c for c, col in stages[1].colors.items() if col == BLUE]
    assert blue
    for c in blue:
        j = brackets[c]
        assert scales.hat_gamma(c.level, c.index) > 2.0 ** (j + 1)


def test_uniform_unit_weight_system_is_admissible():
    win = Window(1, 2, 4)
    scales = WeightScales(ConstantWeight(), win)
    rep = check_admissible(TilingSystem.uniform(win, [0, 1, 2, 3]), scales)
    assert rep.passed
    assert [r.worst for r in rep.results] == [1.0, 1.0, 0.5, 1.0]


def test_repeated_scale_breaks_condition_three():
    win = Window(1, 2, 4)
    scales = WeightScales(ConstantWeight(), win)
    rep = check_admissible(TilingSystem.uniform(win, [0, 2, 2]), scales)
    assert not rep[3].passed
    assert rep[1].passed and rep[2].passed


def test_too_deep_stage_breaks_condition_four():
    win = Window(1, 2, 4)
    scales = WeightScales(ConstantWeight(), win)
    sys_ = TilingSystem.uniform(win, [0, 2])
    sys_.schedule = [0, 1]
    assert not check_admissible(sys_, scales)[4].passed


WEIGHTS = [ConstantWeight(), PowerWeight(0.25), PowerWeight(0.5), PowerWeight(0.75),
           StepPowerWeight(np.array([1.0, 4.0]), 0.5, 0.5)]


@pytest.mark.parametrize("w", WEIGHTS, ids=lambda w: w.name)
def test_built_systems_are_admissible(w):
    win = Window(1, 2, 7)
    scales = WeightScales(w, win)
    q = q_parameters(w, win, win.d_max, scales).q_construction
    levels = list(range(0, 8))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        system = build_admissible_system(w, win, levels, q, 5, scales)
    assert len(system.stages) == 2
    assert succession_holds(system)
    rep = check_admissible(system, scales, q ** 3, q ** 5)
    assert rep.passed, rep


def test_thinning_below_five_is_refused():
    win = Window(1, 1, 3)
    with pytest.raises(ValueError):
        build_admissible_system(ConstantWeight(), win, [0, 1, 2], 64.0, r=3)
