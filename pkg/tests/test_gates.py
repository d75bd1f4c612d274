import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pnormgates.gates import (GateNumericError, PNorm, pnorm_complement, pnorm_complement_grad,
                              pnorm_residual, sigmoid, sigmoid_grad, tanh_grad)

# (1 - a**p) ** (1/p) at 50 significant digits, for the float a given
mpmath.mp.dps = 50


def extended(a, p):
    return float((1 - mpmath.mpf(a) ** p) ** (1 / mpmath.mpf(p)))


def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5
    for x in (1.0, -1.0, 10.0, -10.0):
        assert sigmoid(-x) == pytest.approx(1 - sigmoid(x), abs=1e-15)
    assert sigmoid(-1000.0) == 0.0 and sigmoid(1000.0) == 1.0


@pytest.mark.parametrize("x", [-2.0, 0.0, 3.0])
def test_sigmoid_grad_finite_difference(x):
    h = 1e-5
    numeric = (sigmoid(x + h) - sigmoid(x - h)) / (2 * h)
    assert sigmoid_grad(sigmoid(x)) == pytest.approx(numeric, abs=1e-8)


@pytest.mark.parametrize("x", [-1.5, 0.2, 2.0])
def test_tanh_grad_finite_difference(x):
    h = 1e-5
    numeric = (math.tanh(x + h) - math.tanh(x - h)) / (2 * h)
    assert tanh_grad(math.tanh(x)) == pytest.approx(numeric, abs=1e-8)


def test_pnorm_rejects_bad_p():
    for p in (0.0, -1.0, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            PNorm(p)
    with pytest.raises(ValueError):
        PNorm(2.0, epsilon=1e-3)


def test_spot_values():
    assert pnorm_complement(0.9, PNorm(1)) == pytest.approx(0.1, abs=1e-12)
    assert pnorm_complement(0.9, PNorm(2)) == pytest.approx(0.4359, abs=5e-5)


def test_p5_against_extended_precision():
    # pinned from mpmath at 50 digits
    value = pnorm_complement(0.9, PNorm(5))
    assert value == pytest.approx(extended(0.9, 5), abs=1e-14)
    assert value == pytest.approx(0.836474878076145, abs=1e-14)


def test_boundaries():
    pn = PNorm(2)
    near_one = pnorm_complement(1 - 1e-12, pn)
    assert 0 < near_one < 1e-5
    assert pnorm_complement(1.0, pn) == near_one
    assert pnorm_complement(1e-12, pn) == pytest.approx(1.0, abs=1e-12)
    assert pnorm_complement(0.0, pn) < 1.0
    for p in (0.5, 1, 3):
        v = pnorm_complement(np.array([0.0, 1.0]), PNorm(p))
        assert np.all((v > 0) & (v < 1))


def test_non_finite_input_raises():
    with pytest.raises(GateNumericError):
        pnorm_complement(float("nan"), PNorm(2))


def test_grad_closed_forms():
    for a1 in (0.1, 0.5, 0.9):
        assert pnorm_complement_grad(a1, 1 - a1, PNorm(1)) == -1.0
    assert pnorm_complement_grad(0.6, 0.8, PNorm(2)) == pytest.approx(-0.75, abs=1e-15)


@pytest.mark.parametrize("p", [0.8, 2, 3])
@pytest.mark.parametrize("a1", [0.1, 0.5, 0.9])
def test_grad_finite_difference(a1, p):
    pn = PNorm(p)
    h = 1e-6
    numeric = (pnorm_complement(a1 + h, pn) - pnorm_complement(a1 - h, pn)) / (2 * h)
    analytic = pnorm_complement_grad(a1, pnorm_complement(a1, pn), pn)
    assert analytic == pytest.approx(numeric, rel=1e-6)


@pytest.mark.parametrize("p", [0.5, 0.8, 1, 2, 3])
def test_self_duality(p):
    pn = PNorm(p)
    a = np.linspace(0.01, 0.99, 99)
    np.testing.assert_allclose(pn.complement(pn.complement(a)), a, rtol=0, atol=1e-10)


def test_self_duality_p8_where_representable():
    # below a ~ 0.13, 1 - a**8 / 8 rounds to a handful of doubles next to 1,
    # so a cannot be recovered to 1e-10 in float64
    pn = PNorm(8)
    a = np.linspace(0.13, 0.99, 87)
    np.testing.assert_allclose(pn.complement(pn.complement(a)), a, rtol=0, atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.99), st.sampled_from([0.5, 0.8, 1.0, 2.0, 3.0]))
def test_self_duality_property(a, p):
    pn = PNorm(p)
    assert pn.complement(pn.complement(a)) == pytest.approx(a, abs=1e-10)


def test_p1_is_linear():
    a = np.linspace(0.001, 0.999, 500)
    np.testing.assert_allclose(pnorm_complement(a, PNorm(1)), 1 - a, rtol=0, atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.3, 8), st.floats(1.01, 3))
def test_monotone_in_p(a, p, factor):
    # domain kept where neither value is pinned at 1 - eps
    assert pnorm_complement(a, PNorm(p * factor)) > pnorm_complement(a, PNorm(p))


def test_monotone_over_reported_p_values():
    a = np.linspace(0.05, 0.95, 91)
    values = [pnorm_complement(a, PNorm(p)) for p in (0.5, 0.8, 1, 2, 3, 5, 8)]
    for lo, hi in zip(values, values[1:]):
        assert np.all(hi > lo)


def test_large_p_limit():
    value = pnorm_complement(0.99, PNorm(64))
    assert value > 0.95
    assert value == pytest.approx(extended(0.99, 64), abs=1e-13)  # 0.98841609999712...


@settings(max_examples=200, deadline=None)
@given(st.floats(0.001, 0.999), st.floats(1.05, 10))
def test_gate_sum_above_one_for_p_above_one(a, p):
    assert a + pnorm_complement(a, PNorm(p)) > 1


@settings(max_examples=200, deadline=None)
@given(st.floats(0.001, 0.999), st.floats(0.2, 0.95))
def test_gate_sum_below_one_for_p_below_one(a, p):
    assert a + pnorm_complement(a, PNorm(p)) < 1


@pytest.mark.parametrize("p", [0.5, 0.8, 1, 2, 3, 8])
def test_identity_residual(p):
    a1 = np.linspace(1e-3, 1 - 1e-3, 1000)
    assert pnorm_residual(a1, pnorm_complement(a1, PNorm(p)), p) < 1e-10
