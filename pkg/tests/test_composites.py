import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipld.composites import (BoxWindowComposite, PointComposite,
                             UpperBoundComposite, ZeroComposite)


def brute_prox_1d(hbar, w, s, lo=-50.0, hi=50.0, n=2_000_001):
    v = np.linspace(lo, hi, n)
    return v[np.argmin(s * hbar(v) + 0.5 * (v - w) ** 2)]


def test_box_conj_value_matches_brute_sup():
    comp = BoxWindowComposite([1.0, 0.5], [2.0, 3.0])
    rng = np.random.default_rng(0)
    us = np.stack([rng.uniform(comp.lower, comp.upper) for _ in range(20000)])
    for y in ([0.3, -1.2], [-0.7, 0.1], [2.0, 2.0]):
        y = np.array(y)
        sup = (us @ (-y)).max()
        assert comp.conj_value(y) >= sup - 1e-9
        # the sup is attained at a corner, so equality holds up to sampling
        corners = np.array([[a, b] for a in (1.0, 2.0) for b in (0.5, 3.0)])
        assert comp.conj_value(y) == pytest.approx((corners @ (-y)).max(), abs=1e-12)


def test_box_prox_matches_grid_search():
    comp = BoxWindowComposite([0.0], [2.0])
    hbar = lambda v: np.where(v >= 0, -0.0 * v, -2.0 * v)
    for w, s in ((1.3, 0.7), (-2.0, 1.5), (0.1, 3.0)):
        got = comp.prox(np.array([w]), s)[0]
        ref = brute_prox_1d(hbar, w, s)
        assert got == pytest.approx(ref, abs=1e-4)


def test_upper_bound_prox_and_domain():
    comp = UpperBoundComposite([1.0, 2.0])
    assert np.isinf(comp.conj_value(np.array([0.1, -1.0])))
    assert comp.conj_value(np.array([-1.0, -2.0])) == pytest.approx(5.0)
    out = comp.prox(np.array([3.0, -9.0]), 2.0)
    assert np.all(out <= 0.0)
    hbar = lambda v: np.where(v <= 0, -1.0 * v, np.inf)
    ref = brute_prox_1d(hbar, 3.0, 2.0)
    assert out[0] == pytest.approx(ref, abs=1e-4)


def test_point_prox_linear_shift():
    comp = PointComposite([2.0, -1.0])
    w = np.array([0.5, 0.5])
    assert np.allclose(comp.prox(w, 0.75), w + 0.75 * np.array([2.0, -1.0]))
    assert comp.conj_value(np.array([1.0, 1.0])) == pytest.approx(-1.0)


def test_zero_composite_identity():
    comp = ZeroComposite(3)
    w = np.array([1.0, -2.0, 0.5])
    assert np.allclose(comp.prox(w, 10.0), w)
    assert comp.conj_value(w) == 0.0
    assert comp.constraint_violation(w) == 0.0


@given(
    w=st.floats(-20, 20, allow_nan=False),
    s=st.floats(0.01, 10.0, allow_nan=False),
    lo=st.floats(-3, 0.9, allow_nan=False),
)
@settings(max_examples=100, deadline=None)
def test_box_prox_moreau_projection_identity(w, s, lo):
    hi = lo + 1.5
    comp = BoxWindowComposite([lo], [hi])
    w = np.array([w])
    got = comp.prox(w, s)
    expected = w + s * np.clip(-w / s, lo, hi)
    assert np.allclose(got, expected, atol=1e-12)
    # prox optimality: the mapped point's subgradient interval contains (w-v)/s
    v = got[0]
    resid = (w[0] - v) / s
    if v > 1e-12:
        assert resid == pytest.approx(-lo, abs=1e-9)
    elif v < -1e-12:
        assert resid == pytest.approx(-hi, abs=1e-9)
    else:
        assert -hi - 1e-9 <= resid <= -lo + 1e-9


def test_constraint_violation():
    comp = BoxWindowComposite([0.0, 0.0], [1.0, 1.0])
    assert comp.constraint_violation(np.array([0.5, 0.5])) == 0.0
    assert comp.constraint_violation(np.array([-0.25, 1.5])) == pytest.approx(0.5)
    up = UpperBoundComposite([1.0])
    assert up.constraint_violation(np.array([3.0])) == pytest.approx(2.0)
    pt = PointComposite([1.0])
    assert pt.constraint_violation(np.array([0.25])) == pytest.approx(0.75)
