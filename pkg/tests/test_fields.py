import numpy as np
import pytest
from hypothesis import given, strategies as st

from schauder_lab.fields import (Jet, ScalarField, TimeProfile, kernel_floor, smoothstep,
                                 smoothstep_derivatives, truncated_gaussian_mass)
from schauder_lab.operator_model import _fd_tensor


def test_jet_product_rule_matches_finite_differences(rng):
    X = rng.uniform(-1.5, 1.5, size=(7, 2))
    x, y = Jet.coordinate(X, 0), Jet.coordinate(X, 1)
    jet = (x * x * y + Jet.squared_norm(X) + 1.0).power(2)

    def fn(P):
        return (P[..., 0] ** 2 * P[..., 1] + (P**2).sum(-1) + 1.0) ** 2

    h = np.full(X.shape[:-1], 1e-3)
    for order in (1, 2, 3):
        fd = _fd_tensor(fn, X, order, h * 4 ** (order - 1))
        np.testing.assert_allclose(jet.derivative(order), fd, rtol=1e-5, atol=1e-5)


def test_jet_compose_with_exp(rng):
    X = rng.uniform(-1, 1, size=(5, 1))
    r2 = Jet.squared_norm(X)
    e = np.exp(-r2.v)
    jet = r2.compose(e, -e, e, -e)
    x = X[..., 0]
    np.testing.assert_allclose(jet.d1[..., 0], -2 * x * np.exp(-x**2), rtol=1e-12)
    np.testing.assert_allclose(jet.d2[..., 0, 0], (4 * x**2 - 2) * np.exp(-x**2), rtol=1e-12)
    np.testing.assert_allclose(jet.d3[..., 0, 0, 0], (12 * x - 8 * x**3) * np.exp(-x**2),
                               rtol=1e-10, atol=1e-14)


def test_smoothstep_endpoints_and_three_derivatives_vanish():
    assert smoothstep(0.0) == 0.0 and smoothstep(1.0) == 1.0
    for z in (0.0, 1.0):
        d1, d2, d3 = smoothstep_derivatives(np.array(z))
        assert abs(d1) < 1e-12 and abs(d2) < 1e-12 and abs(d3) < 1e-12


@given(st.floats(0.01, 0.99))
def test_smoothstep_derivatives_match_finite_differences(z):
    h = 1e-4
    d1, d2, _ = smoothstep_derivatives(np.array(z))
    fd1 = (smoothstep(z + h) - smoothstep(z - h)) / (2 * h)
    fd2 = (smoothstep(z + h) - 2 * smoothstep(z) + smoothstep(z - h)) / h**2
    assert abs(d1 - fd1) < 1e-6
    assert abs(d2 - fd2) < 1e-4


@given(st.floats(-1, 2))
def test_smoothstep_is_monotone_and_clipped(z):
    v = smoothstep(z)
    assert 0.0 <= v <= 1.0
    assert smoothstep(z + 0.01) >= v


profiles = st.one_of(
    st.floats(-3, 3).map(lambda v: TimeProfile("constant", value=v)),
    st.tuples(st.floats(-2, 2), st.floats(0, 1), st.floats(0.1, 3)).map(
        lambda a: TimeProfile("sine", value=a[0], amplitude=a[1], frequency=a[2])),
    st.lists(st.floats(0.05, 0.95), min_size=1, max_size=4, unique=True).flatmap(
        lambda js: st.lists(st.floats(-2, 2), min_size=len(js) + 1, max_size=len(js) + 1).map(
            lambda vs: TimeProfile("piecewise_constant", jumps=tuple(sorted(js)),
                                   values=tuple(vs)))),
)


@given(profiles)
def test_time_profile_json_round_trip(p):
    assert TimeProfile.from_json(p.to_json()) == p


@given(profiles, st.floats(0, 1))
def test_time_profile_between_inf_and_sup(p, t):
    assert p.inf() - 1e-12 <= p(t) <= p.sup() + 1e-12


def test_piecewise_profile_pieces_cover_horizon():
    p = TimeProfile("piecewise_constant", jumps=(0.3, 0.7), values=(1.0, 2.0, 3.0))
    assert p.pieces(1.0) == [(0.0, 0.3, 1.0), (0.3, 0.7, 2.0), (0.7, 1.0, 3.0)]
    assert p(0.3) == 2.0
    assert TimeProfile("sine", amplitude=1.0).pieces(1.0) is None


def test_time_profile_rejects_bad_input():
    with pytest.raises(ValueError):
        TimeProfile("piecewise_constant", jumps=(0.5,), values=(1.0,))
    with pytest.raises(ValueError):
        TimeProfile("staircase")


def test_scalar_field_jet_and_bounds(rng):
    f = ScalarField(TimeProfile("constant", value=0.5), amplitude=2.0, frequency=3.0)
    X = rng.uniform(-1, 1, size=(4, 2))
    np.testing.assert_allclose(f.jet(0.0, X).v, f.value(0.0, X))
    assert f.sup() == 2.5 and f.inf() == -1.5 and f.sup_abs() == 2.5
    assert ScalarField.from_json(f.to_json()) == f


def test_kernel_floor_value():
    # erf(1/2)/2, independently: 0.5204998778 / 2
    assert kernel_floor(2.0) == pytest.approx(0.2602499389, abs=1e-10)


def test_truncated_gaussian_mass_limits():
    assert truncated_gaussian_mass(0.5, 1e6, 1.0) == pytest.approx(1.0)
    assert truncated_gaussian_mass(0.0, 1e6, 1.0) == pytest.approx(0.5)
