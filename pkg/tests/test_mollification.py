import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from schauder_lab.fields import TimeProfile, truncated_gaussian_mass
from schauder_lab.mollification import (CONVERGENCE_COLUMNS, gaussian_mollify, hat_c0,
                                        hypothesis_preservation_check, mollified_evaluators,
                                        mollify_operator, nu_floor, solve_discontinuous,
                                        square_profile)
from schauder_lab.operator_model import affine_operator, operator_from_json
from schauder_lab.presets import PRESETS


def floor_by_quadrature(nu0, T):
    val, _ = quad(lambda s: np.exp(-s * s / 4), 0, T / 2, epsabs=1e-14)
    return nu0 * val / (2 * np.sqrt(np.pi))


def test_nu_floor_value():
    assert nu_floor(1.0, 2.0) == pytest.approx(0.26025, abs=5e-6)
    assert nu_floor(1.0, 2.0) == pytest.approx(floor_by_quadrature(1.0, 2.0), abs=1e-12)


@given(st.floats(0.1, 5), st.floats(0.1, 10))
def test_nu_floor_matches_quadrature(nu0, T):
    assert nu_floor(nu0, T) == pytest.approx(floor_by_quadrature(nu0, T), abs=1e-10)


def test_hat_c0_sign_cases():
    assert hat_c0(0.5, 1.0) == 0.5
    assert hat_c0(-1.0, 2.0) == pytest.approx(-nu_floor(1.0, 2.0))


piecewise = st.integers(1, 4).flatmap(lambda k: st.tuples(
    st.lists(st.floats(0.05, 0.95), min_size=k, max_size=k, unique=True),
    st.lists(st.floats(-3, 3), min_size=k + 1, max_size=k + 1)))


def profile(jv):
    js, vs = jv
    return TimeProfile("piecewise_constant", jumps=tuple(sorted(js)), values=tuple(vs))


@given(piecewise, st.floats(0, 1), st.sampled_from([1.0, 4.0, 64.0, 1024.0]))
def test_mollification_preserves_order(jv, t, n):
    p = profile(jv)
    q = TimeProfile("piecewise_constant", jumps=p.jumps, values=tuple(v + 0.5 for v in p.values))
    assert gaussian_mollify(p, n, t, 1.0) <= gaussian_mollify(q, n, t, 1.0) + 1e-14


@given(piecewise, st.floats(0, 1), st.sampled_from([1.0, 4.0, 64.0, 1024.0]))
def test_jensen_direction(jv, t, n):
    p = profile(jv)
    lhs = gaussian_mollify(p, n, t, 1.0) ** 2
    assert lhs <= gaussian_mollify(square_profile(p), n, t, 1.0) + 1e-10


@given(st.floats(0, 2), st.sampled_from([1.0, 16.0, 256.0]))
def test_constant_is_mollified_to_truncated_mass(t, n):
    one = TimeProfile("constant", value=1.0)
    assert gaussian_mollify(one, n, t, 2.0) == pytest.approx(
        float(truncated_gaussian_mass(t, n, 2.0)), abs=1e-14)
    assert gaussian_mollify(one, n, t, 2.0) >= nu_floor(1.0, 2.0) - 1e-15


@given(st.floats(0, 1), st.sampled_from([1.0, 4.0, 64.0, 1024.0]), st.floats(-2, 2),
       st.floats(0, 1), st.floats(0.2, 3))
def test_quadrature_matches_adaptive_integration(t, n, base, amp, freq):
    p = TimeProfile("sine", value=base, amplitude=amp, frequency=freq)
    kern = lambda s: np.sqrt(n / (4 * np.pi)) * np.exp(-n * (t - s) ** 2 / 4) * p(s)
    exact, _ = quad(kern, 0, 1, epsabs=1e-13, points=[t], limit=200)
    assert gaussian_mollify(p, n, t, 1.0) == pytest.approx(exact, abs=1e-8)


def test_mollify_rejects_small_n():
    with pytest.raises(ValueError):
        gaussian_mollify(TimeProfile(), 0.5, 0.1, 1.0)


def test_mollified_operator_constants():
    op = operator_from_json(PRESETS["two-stage-heat"]["operator"])
    m = mollify_operator(op, 16.0)
    assert m.nu0 == pytest.approx(nu_floor(op.nu0, op.horizon))
    assert m.description["mollified"] == 16.0
    X = np.zeros((1, 1))
    ev = mollified_evaluators(op, 16.0, op.horizon / 2, X)
    assert ev["nu"][0] == pytest.approx(1.5 * float(truncated_gaussian_mass(2.5, 16.0, 5.0)),
                                        rel=1e-10)
    assert m.diffusion(2.5, X)[0, 0, 0] == pytest.approx(ev["nu"][0])


def test_hypotheses_preserved_for_measurable_example():
    op = operator_from_json(PRESETS["sect4-example-measurable"]["operator"])
    rep = hypothesis_preservation_check(op, n_values=(4, 64), samples=(5, 9))
    assert rep.passed, rep.details
    assert rep.jensen_violation <= 1e-10
    assert rep.floor_violation <= 1e-8


def test_solve_discontinuous_small_family():
    op = affine_operator(1, 1.0, Q_profile={"profile": "piecewise_constant", "jumps": [0.5],
                                            "values": [1.0, 2.0]})
    res = solve_discontinuous(op, lambda X: np.exp(-X[..., 0] ** 2 / 4), n_values=(4, 16, 64),
                              h=1 / 16, tau=1e-2, radii=(8.0, 16.0))
    assert res.csv().splitlines()[0] == ",".join(CONVERGENCE_COLUMNS)
    assert np.isnan(res.rows[0]["increment_sup"])
    assert all(r["residual"] <= 10 * (1e-2 + 1 / 16**2) for r in res.rows)
    with pytest.raises(ValueError, match="increasing"):
        solve_discontinuous(op, lambda X: 0 * X[..., 0], n_values=(16, 4))
