import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from tracelab.geometry import SpaceTimeBox, Window
from tracelab.weights import (ConstantWeight, FunctionWeight, PowerWeight, StepPowerWeight,
                              UnitCellWeight, WeightMisdeclared, WeightScales, a1loc_constant,
                              box_average, box_integral, clipped_exponential_weight,
                              empirical_a1, essinf, q_parameters, quadrature_integral,
                              verify_a1_inequalities)


def nquad_integral(w, box: SpaceTimeBox, breaks=()):
    """Independent reference: scipy nested quadrature, t innermost."""
    n = box.n

    def integrand(*args):
        t, xs = args[0], args[1:]
        return float(w(np.array([xs]), np.array([t]))[0])

    ranges = [(box.t0, box.t1)] + list(zip(box.lo, box.hi))
    opts = [{"points": [b for b in breaks if box.t0 < b < box.t1]} if breaks else {}] + \
        [{"points": np.arange(-4, 5, 0.5).tolist(), "limit": 200}] * n
    return integrate.nquad(integrand, ranges, opts=opts)[0]


def test_constant_weight_average_is_one():
    box = SpaceTimeBox((0.25,), (1.0,), 0.0, 0.5)
    assert box_average(ConstantWeight(), box) == 1.0


@pytest.mark.parametrize("k, expected", [(0, 2.0), (2, 4.0)])
def test_power_half_box_average(k, expected):
    w = PowerWeight(0.5)
    side = 2.0 ** -k
    box = SpaceTimeBox((side,), (2 * side,), 0.0, side)
    assert box_average(w, box) == pytest.approx(expected, rel=1e-14)


def test_power_half_scale_table():
    scales = WeightScales(PowerWeight(0.5), Window(2, 1, 3))
    for k in range(4):
        np.testing.assert_allclose(scales.hat[k], 2.0 ** (1 + k / 2), rtol=1e-14)
    np.testing.assert_allclose(scales.gamma3(2, 1), 4 * scales.integral[2])


def test_essinf_values():
    assert essinf(ConstantWeight(), SpaceTimeBox((0.0,), (1.0,), 0.1, 0.2))[0] == 1.0
    val, exact = essinf(PowerWeight(0.5), SpaceTimeBox((0.0,), (1.0,), 0.25, 0.64))
    assert exact and val == pytest.approx(0.64 ** -0.5)
    for k in range(4):
        val, _ = essinf(PowerWeight(0.5), SpaceTimeBox((0.0,), (2.0 ** -k,), 0.0, 2.0 ** -k))
        assert val == pytest.approx(2 ** (k / 2))


@pytest.mark.parametrize("alpha, expected", [(0.0, 1.0), (0.5, 2.0), (0.75, 4.0)])
def test_a1_constant_of_power_weights(alpha, expected):
    w = ConstantWeight() if alpha == 0 else PowerWeight(alpha)
    assert empirical_a1(w, Window(1, 2, 5), 5) == pytest.approx(expected, rel=1e-12)


def test_misdeclared_weight_raises():
    w = FunctionWeight(lambda x, t: np.minimum(1e3, 1.0 / t), declared_c=1.5)
    with pytest.raises(WeightMisdeclared):
        a1loc_constant(w, Window(1, 1, 1), 1)


@pytest.mark.parametrize("n, q", [(1, 64.0), (2, 128.0)])
def test_q_for_unit_weight(n, q):
    params = q_parameters(ConstantWeight(), Window(n, 1, 3), 3)
    assert params.qtilde == 1.0
    assert params.q == q
    assert params.q_construction == 2 * q


def test_q_for_power_weight_is_finite():
    params = q_parameters(PowerWeight(0.5), Window(1, 2, 5), 5)
    assert math.isfinite(params.q) and params.q >= 64


def test_a1_inequalities_for_unit_weight():
    rep = verify_a1_inequalities(ConstantWeight(), Window(1, 2, 4), 4)
    assert rep.passed
    ratios = {c.name: c.worst_ratio for c in rep.checks}
    assert ratios["a1loc"] == 1.0
    # each reported ratio is normalised by 2^(n+1) C; the raw comparisons are exactly one
    assert ratios["adjacent-essinf"] * 4 == pytest.approx(1.0)
    assert ratios["adjacent-integral"] * 4 == pytest.approx(1.0)


def test_a1_inequalities_for_power_weight():
    rep = verify_a1_inequalities(PowerWeight(0.5), Window(1, 2, 5), 5)
    assert rep.passed
    assert all(c.worst_ratio <= 1 for c in rep.checks)


def test_adversarial_weight_reports_failures():
    rep = verify_a1_inequalities(clipped_exponential_weight(), Window(1, 1, 3), 3)
    assert not rep.passed
    assert "a1loc" in [c.name for c in rep.failures()]


BUILT_IN = [
    ConstantWeight(2.5),
    PowerWeight(0.25),
    PowerWeight(0.75, 3.0),
    StepPowerWeight(np.array([1.0, 4.0]), 0.5, 0.5),
    UnitCellWeight(np.array([[1.0, 2.0], [5.0, 0.5]])),
]


@pytest.mark.parametrize("w", BUILT_IN, ids=lambda w: w.name)
def test_exact_integral_matches_nested_quadrature(w):
    rng = np.random.default_rng(3)
    for _ in range(4):
        lo = rng.uniform(-1.5, 1.5)
        hi = lo + rng.uniform(0.1, 1.2)
        t0 = rng.choice([0.0, rng.uniform(0, 1)])
        t1 = t0 + rng.uniform(0.1, 1.0)
        box = SpaceTimeBox((lo,), (hi,), t0, t1)
        ref = nquad_integral(w, box, breaks=[1.0, 2.0])
        assert box_integral(w, box) == pytest.approx(ref, rel=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.95), st.floats(-2, 2), st.floats(0.05, 1.5),
       st.floats(0.0, 1.0), st.floats(0.01, 1.0))
def test_power_weight_exact_matches_quadrature(alpha, lo, width, t0, height):
    w = PowerWeight(alpha)
    box = SpaceTimeBox((lo,), (lo + width,), t0, t0 + height)
    assert box_integral(w, box) == pytest.approx(quadrature_integral(w, box), rel=1e-6)


def test_quadrature_reports_bad_integrand():
    from tracelab.quadrature import QuadratureFailure
    w = FunctionWeight(lambda x, t: np.full(len(t), np.nan))
    with pytest.raises(QuadratureFailure):
        quadrature_integral(w, SpaceTimeBox((0.0,), (1.0,), 0.0, 1.0))


@pytest.mark.parametrize("w, box", [
    (StepPowerWeight(np.array([1.0, 4.0]), 0.5, 0.5),
     SpaceTimeBox((-0.0079,), (0.4952,), 0.5211, 0.6930)),
    (UnitCellWeight(np.array([[1.0, 2.0], [5.0, 0.5]])),
     SpaceTimeBox((0.6031,), (1.0074,), 0.0, 0.2779)),
    (UnitCellWeight(np.array([[1.0, 2.0], [5.0, 0.5]])),
     SpaceTimeBox((0.2,), (2.7,), -1.5, 1.25)),
])
def test_quadrature_splits_on_jumps(w, box):
    assert quadrature_integral(w, box) == pytest.approx(box_integral(w, box), rel=1e-7)
