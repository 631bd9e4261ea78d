import itertools
import warnings
from fractions import Fraction

import numpy as np
import pytest

from tracelab.extension import (LimitingExtension, MollifierSpec, PartitionError, band,
                                build_partition_g, extend_limiting, extend_smooth,
                                mollify_E_eps, mollify_grid, smooth_band, smooth_step, unit_bump)
from tracelab.functions import CallableFunction, GridFunction, trace_of
from tracelab.geometry import ResolutionError, Window, dilate
from tracelab.harness import (boundary_catalog, full_uniform_system, grid_sample, raw_system)
from tracelab.tilings import TilingSystem, build_lj_sequence
from tracelab.weights import ConstantWeight, PowerWeight, WeightScales


# -- literal index-set algebra ---------------------------------------------------

def b_set(cube, window, K):
    """(k, m) with the closed cube Q_{k,m} inside the closed dilation of ``cube``."""
    lo, hi = dilate(cube, window).real_bounds()
    lo = [Fraction(v).limit_denominator(2 ** 20) for v in lo]
    hi = [Fraction(v).limit_denominator(2 ** 20) for v in hi]
    out = set()
    for k in range(K + 1):
        side = Fraction(1, 2 ** k)
        N = window.M * 2 ** k
        ranges = []
        for a in range(window.n):
            first = -((-lo[a]) // side)
            ranges.append([m for m in range(int(first), int(hi[a] // side))
                           if m * side >= lo[a] and (m + 1) * side <= hi[a]])
        for m in itertools.product(*ranges):
            out.add((k, tuple(v % N for v in m)))
    return out


def e_sets_by_definition(system, K):
    keys = [(s, c) for s, chosen in enumerate(system.selected) for c in chosen]
    B = {key: b_set(key[1], system.window, K) for key in keys}
    D = {}
    for s, chosen in enumerate(system.selected):
        for level in sorted({c.level for c in chosen}):
            taken = set()
            for c in sorted(c for c in chosen if c.level == level):
                D[(s, c)] = B[(s, c)] - taken
                taken |= D[(s, c)]
    E = {}
    for s, c in keys:
        finer = set()
        for s2, c2 in keys:
            if s2 >= s and c2.level > c.level:
                finer |= B[(s2, c2)]
        E[(s, c)] = D[(s, c)] - finer
    return E


def family_sets(fam):
    sets = fam.e_sets()
    return {(o.stage, o.cube): sets[i] for i, o in enumerate(fam.owners_list)}


def systems_for_sets():
    out = []
    for n, M, d, levels in [(1, 2, 4, [0, 1, 3]), (1, 1, 5, [0, 2, 4, 5]), (2, 1, 3, [0, 1, 3])]:
        win = Window(n, M, d)
        out.append(TilingSystem.uniform(win, levels))
    win = Window(1, 2, 5)
    scales = WeightScales(PowerWeight(0.75), win)
    out.append(raw_system(PowerWeight(0.75), win, [0, 1, 2, 3, 4, 5], scales))
    return out


@pytest.mark.parametrize("system", systems_for_sets(), ids=lambda s: f"n{s.window.n}-{s.schedule}")
def test_e_sets_match_set_algebra(system):
    fam = build_partition_g(system)
    K = fam.K
    expected = e_sets_by_definition(system, K)
    got = family_sets(fam)
    assert got == expected
    # pairwise disjoint and exhaustive over the truncated range
    union = set()
    total = 0
    for v in got.values():
        union |= v
        total += len(v)
    everything = {(k, m) for k in range(K + 1)
                  for m in itertools.product(range(system.window.M * 2 ** k), repeat=system.window.n)}
    assert total == len(union)
    assert union == everything


def test_partition_refuses_half_dilations():
    win = Window(1, 1, 3, k0=1)
    with pytest.raises(PartitionError):
        build_partition_g(TilingSystem.uniform(win, [0, 1]))


def test_partition_refuses_inadmissible_system():
    win = Window(1, 1, 3)
    scales = WeightScales(ConstantWeight(), win)
    with pytest.raises(PartitionError, match="condition 3"):
        build_partition_g(TilingSystem.uniform(win, [0, 1, 1]), scales)


# -- ramps and bands ------------------------------------------------------------------

def test_smooth_step_shape():
    x = np.linspace(-0.5, 1.5, 401)
    s = smooth_step(x)
    assert np.all(np.diff(s) >= 0)
    assert s[0] == 0 and s[-1] == 1
    assert smooth_step(0.5) == pytest.approx(0.5)


@pytest.mark.parametrize("deriv", [1, 2])
def test_smooth_step_derivatives(deriv):
    x = np.linspace(0.02, 0.98, 97)
    h = 1e-5
    fd = (smooth_step(x + h, deriv - 1) - smooth_step(x - h, deriv - 1)) / (2 * h)
    np.testing.assert_allclose(smooth_step(x, deriv), fd, atol=1e-5)


def test_unit_bumps_sum_to_one():
    u = np.linspace(-3, 3, 1001)
    total = sum(unit_bump(u - j) for j in range(-5, 6))
    np.testing.assert_allclose(total, 1.0, atol=1e-14)
    assert np.all(unit_bump(np.array([-0.5, 1.5])) == 0)


@pytest.mark.parametrize("K", [0, 1, 4, 7])
def test_bands_sum_to_one_below_two(K):
    t = np.linspace(1e-6, 2.0, 5001)
    total = sum(band(k, t, K) for k in range(K + 1))
    np.testing.assert_allclose(total, 1.0, atol=1e-14)
    # at most two bands overlap
    live = sum((band(k, t, K) != 0).astype(int) for k in range(K + 1))
    assert live.max() <= 2


def test_smooth_bands_sum_to_cutoff():
    K = 6
    t = np.linspace(1e-6, 1.2, 3001)
    total = sum(smooth_band(k, t, K) for k in range(1, K + 1))
    np.testing.assert_allclose(total[t <= 0.5], 1.0, atol=1e-14)
    assert np.all(total[t >= 1] == 0)


# -- cube partition -------------------------------------------------------------------

def random_points(rng, win, count, t_max=2.0):
    return rng.uniform(0, win.M, (count, win.n)), rng.uniform(0, t_max, count)


@pytest.mark.parametrize("n, M, d", [(1, 2, 5), (2, 1, 4)])
def test_partition_sums_to_one(n, M, d):
    win = Window(n, M, d)
    scales = WeightScales(ConstantWeight(), win)
    fam = build_partition_g(full_uniform_system(ConstantWeight(), win, scales), scales)
    rng = np.random.default_rng(0)
    x, t = random_points(rng, win, 10 ** 4)
    g = np.asarray(fam.g_matrix(x, t).sum(axis=1)).ravel()
    np.testing.assert_allclose(g, 1.0, atol=1e-10)
    np.testing.assert_allclose(fam.theta_sum(x, t), 1.0, atol=1e-10)
    assert fam.support_multiplicity(x, t).max() <= 2 * 3 ** n


def test_gradient_bound_and_lemma_constant():
    win = Window(1, 2, 5)
    w = PowerWeight(0.5)
    scales = WeightScales(w, win)
    fam = build_partition_g(raw_system(w, win, [0, 1, 2, 3, 4, 5], scales), scales)
    rng = np.random.default_rng(1)
    x, t = random_points(rng, win, 4000)
    ratios = fam.gradient_ratios(x, t)
    assert np.isfinite(ratios).all() and ratios.max() < 50
    const = fam.gradient_constant(w, scales)
    assert np.isfinite(const).all() and const.max() < 100


def test_gradient_matrix_matches_differences():
    win = Window(2, 1, 3)
    fam = build_partition_g(TilingSystem.uniform(win, [0, 1, 3]))
    rng = np.random.default_rng(2)
    x, t = random_points(rng, win, 200)
    t = 0.05 + t
    h = 1e-6
    for a in range(3):
        dx = np.zeros((len(t), 2))
        dt = np.zeros(len(t))
        if a < 2:
            dx[:, a] = h
        else:
            dt[:] = h
        fd = (fam.g_matrix(x + dx, t + dt) - fam.g_matrix(x - dx, t - dt)) / (2 * h)
        exact = fam.g_matrix(x, t, component=a)
        assert abs(fd - exact).max() < 1e-4


# -- limiting extension ---------------------------------------------------------------

def test_limiting_extension_of_constant():
    win = Window(1, 2, 5)
    phi = GridFunction(win, 6, np.full(128, 2.5))
    f = extend_limiting(phi, TilingSystem.uniform(win, [0, 2, 5]))
    rng = np.random.default_rng(3)
    x, t = random_points(rng, win, 2000)
    np.testing.assert_allclose(f.value(x, t), 2.5, rtol=1e-12)


def test_limiting_extension_recovers_trace():
    win = Window(1, 2, 8)
    scales = WeightScales(ConstantWeight(), win)
    system = full_uniform_system(ConstantWeight(), win, scales)
    for name in ("cos1", "step", "bump", "random-2"):
        phi = grid_sample(boundary_catalog(1, 2)[name], win, 8)
        tr = trace_of(extend_limiting(phi, system), win, 8).trace
        assert (tr - phi).l1_norm() <= 1e-2 * phi.l1_norm()


def test_limiting_extension_derivatives():
    win = Window(1, 2, 4)
    phi = grid_sample(boundary_catalog(1, 2)["random-0"], win, 6)
    f = extend_limiting(phi, TilingSystem.uniform(win, [0, 1, 3, 4]))
    rng = np.random.default_rng(4)
    x, t = random_points(rng, win, 300)
    exact = f.derivatives(x, t, 1)
    approx = CallableFunction(f.value, 1).derivatives(x, t, 1)
    for alpha in exact:
        np.testing.assert_allclose(exact[alpha], approx[alpha], atol=1e-3)


def schedule_system(phi, win, scales):
    """The uniform system driven by the slab schedule of a first extension of phi."""
    w = ConstantWeight()
    first = extend_limiting(phi, full_uniform_system(w, win, scales))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        levels = build_lj_sequence(first, w, win, 12).levels
    return raw_system(w, win, levels, scales)


def test_limiting_extension_is_not_linear():
    win = Window(1, 2, 6)
    scales = WeightScales(ConstantWeight(), win)
    cat = boundary_catalog(1, 2)
    phi1 = grid_sample(cat["const"], win, 7)
    phi2 = grid_sample(cat["high-freq"], win, 7)
    both = GridFunction(win, 7, phi1.values + phi2.values)
    sys1, sys2, sys12 = (schedule_system(p, win, scales) for p in (phi1, phi2, both))
    assert sys1.schedule != sys2.schedule
    rng = np.random.default_rng(5)
    x, t = random_points(rng, win, 500, 0.3)
    f1 = extend_limiting(phi1, sys1).value(x, t)
    f2 = extend_limiting(phi2, sys2).value(x, t)
    f12 = extend_limiting(both, sys12).value(x, t)
    assert np.abs(f12 - f1 - f2).max() > 1e-3
    # with the system held fixed the construction is linear
    g = LimitingExtension(build_partition_g(sys12), phi1).value(x, t) + \
        LimitingExtension(build_partition_g(sys12), phi2).value(x, t)
    np.testing.assert_allclose(f12, g, atol=1e-12)


# -- mollifier and smooth extension -----------------------------------------------------

@pytest.mark.parametrize("n, l", [(1, 1), (1, 2), (1, 3), (2, 2), (2, 3)])
def test_moment_conditions_hold(n, l):
    spec = MollifierSpec.build(n, l)
    np.testing.assert_allclose(spec.residuals(), 0, atol=1e-12)
    if l == 1:
        assert spec.mu == (1.0,)


def test_mollifier_keeps_constants():
    win = Window(1, 2, 6)
    phi = GridFunction(win, 8, np.full(512, -1.25))
    spec = MollifierSpec.build(1, 2)
    np.testing.assert_allclose(mollify_grid(phi, 1 / 16, spec).values, -1.25, rtol=1e-12)
    x = np.random.default_rng(6).uniform(0, 2, (100, 1))
    np.testing.assert_allclose(mollify_E_eps(phi, 1 / 16, spec, x), -1.25, rtol=1e-12)


@pytest.mark.parametrize("n, l, poly", [
    (1, 2, lambda p: 3 * p[:, 0] - 2),
    (1, 3, lambda p: p[:, 0] ** 2 - p[:, 0]),
    (2, 2, lambda p: p[:, 0] - 2 * p[:, 1] + 0.5),
])
def test_mollifier_reproduces_low_degree_polynomials(n, l, poly):
    M = 4
    win = Window(n, M, 5)
    depth = 7 if n == 1 else 6
    phi = grid_sample(poly, win, depth)
    eps = 1 / 8
    spec = MollifierSpec.build(n, l)
    pts = phi.centers()
    reach = (l + 1) * eps + phi.pitch
    inner = np.all((pts > reach) & (pts < M - reach), axis=1)
    moll = mollify_grid(phi, eps, spec).values.ravel()
    np.testing.assert_allclose(moll[inner], phi.values.ravel()[inner], atol=1e-6)



def test_pointwise_mollifier_reproduces_affine_when_resolved():
    # between sample centres the discrete bump moments are only approximate;
    # the bias falls off faster than any power of the pitch
    win = Window(1, 4, 5)
    spec = MollifierSpec.build(1, 2)
    x = np.linspace(1, 3, 97)[:, None]
    errs = []
    for depth in (6, 7, 8):
        phi = grid_sample(lambda p: 3 * p[:, 0] - 2, win, depth)
        errs.append(np.abs(mollify_E_eps(phi, 1 / 8, spec, x) - (3 * x[:, 0] - 2)).max())
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 1e-6


def test_mollifier_radius_below_resolution_is_refused():
    win = Window(1, 1, 4)
    phi = GridFunction(win, 4, np.zeros(16))
    with pytest.raises(ResolutionError):
        mollify_grid(phi, 1 / 32, MollifierSpec.build(1, 2))


def test_smooth_extension_of_constant():
    win = Window(1, 2, 5)
    phi = GridFunction(win, 7, np.full(256, 4.0))
    f = extend_smooth(phi)
    rng = np.random.default_rng(7)
    x = rng.uniform(0, 2, (500, 1))
    t = rng.uniform(0, 0.5, 500)
    np.testing.assert_allclose(f.value(x, t), 4.0, rtol=1e-12)
    assert np.all(f.value(x, np.full(500, 1.0)) == 0)


def test_smooth_extension_is_linear():
    win = Window(1, 2, 5)
    cat = boundary_catalog(1, 2)
    a = grid_sample(cat["bump"], win, 7)
    b = grid_sample(cat["random-4"], win, 7)
    comb = GridFunction(win, 7, 2 * a.values - 3 * b.values)
    rng = np.random.default_rng(8)
    x = rng.uniform(0, 2, (400, 1))
    t = rng.uniform(0, 1, 400)
    lhs = extend_smooth(comb).value(x, t)
    rhs = 2 * extend_smooth(a).value(x, t) - 3 * extend_smooth(b).value(x, t)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_smooth_extension_trace():
    win = Window(1, 2, 7)
    phi = grid_sample(boundary_catalog(1, 2)["cos-mix"], win, 9)
    tr = trace_of(extend_smooth(phi), win, 9).trace
    assert (tr - phi).l1_norm() <= 1e-3 * phi.l1_norm()


@pytest.mark.parametrize("n", [1, 2])
def test_smooth_extension_derivatives(n):
    M = 2 if n == 1 else 1
    win = Window(n, M, 4)
    phi = grid_sample(boundary_catalog(n, M)["bump"], win, 6 if n == 1 else 5)
    f = extend_smooth(phi)
    rng = np.random.default_rng(9)
    x = rng.uniform(0, M, (200, n))
    t = rng.uniform(0.05, 0.9, 200)
    exact = f.derivatives(x, t, 2)
    approx = CallableFunction(f.value, n).derivatives(x, t, 2)
    for alpha in exact:
        scale = 1 + np.abs(exact[alpha]).max()
        tol = 1e-5 if sum(alpha) < 2 else 1e-2
        np.testing.assert_allclose(exact[alpha], approx[alpha], atol=tol * scale)
