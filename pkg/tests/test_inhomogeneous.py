import numpy as np
import pytest

from schauder_lab.data import make_source
from schauder_lab.inhomogeneous import (SCHAUDER_COLUMNS, ForcedProblem,
                                        integral_identity_residual, schauder_csv, schauder_ratio,
                                        solve_forced, voc_solution)
from schauder_lab.operator_model import affine_operator
from schauder_lab.truncated_solver import solve_dirichlet

HEAT = affine_operator(1, 1.0)
OU = affine_operator(1, 1.0, B=-1.0)


def gauss(X):
    return np.exp(-X[..., 0] ** 2)


def test_voc_without_source_equals_homogeneous_solve():
    p = ForcedProblem(OU, gauss, None, h=1 / 32, tau=1e-2, radii=(6.0,))
    voc = voc_solution(p, 0.1)
    ref = solve_dirichlet(OU, gauss, 6.0, 1 / 32, 1e-2, output_times=voc.times)
    np.testing.assert_allclose(voc.frames, ref.frames, atol=1e-14)


def test_voc_matches_direct_forced_solve():
    p = ForcedProblem(HEAT, gauss, make_source({"name": "sin_decay"}), h=1 / 32, tau=1e-3,
                      radii=(8.0, 16.0, 32.0))
    voc = voc_solution(p, 0.05)
    direct = solve_forced(p)
    diff = max(np.abs(voc.frames[k] - direct.at(t).values).max()
               for k, t in enumerate(voc.times))
    assert diff <= 10 * (1e-3 + 1 / 32**2 + 0.05**2)


def test_voc_argument_validation():
    p = ForcedProblem(HEAT, gauss, None, h=1 / 16, tau=1e-3, radii=(4.0,))
    with pytest.raises(ValueError, match="multiple of tau"):
        voc_solution(p, 1 / 16)
    with pytest.raises(ValueError, match="solves"):
        voc_solution(p, 1e-3)


def test_theta_must_be_in_unit_interval():
    with pytest.raises(ValueError):
        ForcedProblem(HEAT, gauss, theta=1.0)


def test_schauder_ratio_of_zero_data_is_zero():
    p = ForcedProblem(HEAT, lambda X: 0 * X[..., 0], None, h=1 / 16, tau=1e-2, radii=(4.0,))
    row = schauder_ratio(p)
    assert row.ratio == 0.0


def test_schauder_ratio_heat_is_at_most_one():
    # for the heat semigroup every derivative norm is nonincreasing in time
    p = ForcedProblem(HEAT, gauss, None, h=1 / 32, tau=1e-2, radii=(8.0,))
    row = schauder_ratio(p, frame_stride=10)
    assert 0.9 < row.ratio <= 1.0 + 1e-6
    text = schauder_csv([row])
    assert text.splitlines()[0] == ",".join(SCHAUDER_COLUMNS)


def test_integral_identity_residual_is_small():
    p = ForcedProblem(OU, gauss, make_source({"name": "cos_linear"}), h=1 / 32, tau=1e-3,
                      radii=(8.0, 16.0, 32.0))
    tr = solve_forced(p)
    res = integral_identity_residual(tr, OU, p.g, 1.0)
    assert res <= 10 * (1e-3 + 1 / 32**2)
    per = integral_identity_residual(tr, OU, p.g, 1.0, exclude_times=(0.5,), per_frame=True)
    assert np.isnan(per[tr.index(0.5)]) and per[0] == 0.0
