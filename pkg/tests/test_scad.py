import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import survcbps as sc
from survcbps.scad import ScadParams, lqa_weight, scad_derivative, scad_value


def reference_derivative(t, lam, a):
    """Independent piecewise evaluation of the penalty derivative."""
    t = float(t)
    if t <= lam:
        return lam
    excess = a * lam - t
    if excess < 0:
        excess = 0.0
    return excess / (a - 1.0)


def reference_value(t, lam, a):
    """Integrate the derivative in closed form, branch by branch."""
    t = float(t)
    if t <= lam:
        return lam * t
    if t <= a * lam:
        # lam^2 + integral of (a*lam - s)/(a-1) from lam to t
        head = lam * lam
        tail = (a * lam * (t - lam) - 0.5 * (t * t - lam * lam)) / (a - 1.0)
        return head + tail
    return lam * lam * (a + 1.0) / 2.0


def test_derivative_matches_reference_on_grid():
    lam, a = 0.3, 3.7
    params = ScadParams(lam=lam, a=a)
    grid = np.linspace(0.0, 1.5 * a * lam, 1000)
    ref = np.array([reference_derivative(t, lam, a) for t in grid])
    np.testing.assert_allclose(scad_derivative(grid, params), ref,
                               rtol=0, atol=1e-12)


def test_value_matches_reference_on_grid():
    lam, a = 0.3, 3.7
    params = ScadParams(lam=lam, a=a)
    grid = np.linspace(0.0, 1.5 * a * lam, 1000)
    ref = np.array([reference_value(t, lam, a) for t in grid])
    np.testing.assert_allclose(scad_value(grid, params), ref,
                               rtol=0, atol=1e-12)


def test_numerical_derivative_off_knot():
    lam, a = 0.25, 3.7
    params = ScadParams(lam=lam, a=a)
    h = 1e-5
    grid = np.linspace(1e-3, 1.4 * a * lam, 1000)
    knots = np.array([lam, a * lam])
    off = grid[np.min(np.abs(grid[:, None] - knots[None, :]), axis=1) > 10 * h]
    numeric = (scad_value(off + h, params) - scad_value(off - h, params)) / (2 * h)
    np.testing.assert_allclose(numeric, scad_derivative(off, params), atol=1e-6)


def test_known_spot_values():
    params = ScadParams(lam=0.5, a=3.0)
    assert scad_derivative(0.0, params) == 0.5
    assert scad_derivative(0.5, params) == 0.5
    assert scad_derivative(1.0, params) == pytest.approx(0.25)
    assert scad_derivative(2.0, params) == 0.0
    assert scad_value(0.0, params) == 0.0
    assert scad_value(0.5, params) == 0.25
    assert scad_value(5.0, params) == pytest.approx(0.5)  # lam^2 (a+1)/2


def test_negative_argument_rejected():
    params = ScadParams(lam=0.5)
    with pytest.raises(sc.InputError):
        scad_derivative(-0.1, params)
    with pytest.raises(sc.InputError):
        scad_value(np.array([0.1, -0.1]), params)


def test_params_validation():
    with pytest.raises(sc.InputError):
        ScadParams(lam=0.0)
    with pytest.raises(sc.InputError):
        ScadParams(lam=0.5, a=2.0)
    with pytest.raises(sc.InputError):
        ScadParams(lam=np.inf)


@given(
    t=st.floats(min_value=0.0, max_value=50.0),
    lam=st.floats(min_value=1e-3, max_value=5.0),
    a=st.floats(min_value=2.001, max_value=10.0),
)
@settings(max_examples=200, deadline=None)
def test_penalty_properties(t, lam, a):
    params = ScadParams(lam=lam, a=a)
    val = scad_value(t, params)
    der = scad_derivative(t, params)
    # nonnegative, bounded derivative, value capped at the plateau
    assert 0.0 <= der <= lam + 1e-12
    assert 0.0 <= val <= lam * lam * (a + 1.0) / 2.0 + 1e-12
    # monotone in t
    assert scad_value(t + 0.1, params) >= val - 1e-12


def test_lqa_weight_definition():
    params = ScadParams(lam=0.4, a=3.7)
    b = np.array([0.0, 0.2, 1.0, 5.0])
    w = lqa_weight(b, params, eps=1e-6)
    expect = scad_derivative(np.abs(b), params) / (np.abs(b) + 1e-6)
    np.testing.assert_allclose(w, expect)
    # sign of the coefficient is irrelevant
    np.testing.assert_allclose(lqa_weight(-b, params, eps=1e-6), w)
    assert lqa_weight(0.0, params) == pytest.approx(0.4 / 1e-6)
    with pytest.raises(sc.InputError):
        lqa_weight(0.0, params, eps=-1.0)
