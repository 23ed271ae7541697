import numpy as np
import pytest

from schauder_lab.data import make_oracle
from schauder_lab.operator_model import affine_operator, operator_from_json
from schauder_lab.presets import PRESETS
from schauder_lab.truncated_solver import (ConvergenceError, Trajectory, assemble,
                                           BallMesh, expanding_ball_solve,
                                           localization_split_check, sign_preservation_check,
                                           solve_dirichlet, verify_sup_bound)

HEAT = affine_operator(1, 1.0)


def gauss(X):
    return np.exp(-(X**2).sum(-1))


def heat_error(traj, R=2.0):
    u = make_oracle({"name": "heat_gaussian", "width": 1.0})
    g = traj.frame(0)
    m = g.region(R)
    return max(np.abs(traj.frames[k][m] - u(t, g.coords[m])).max()
               for k, t in enumerate(traj.times))


def test_heat_kernel_oracle_coarse_mesh():
    tr = solve_dirichlet(HEAT, gauss, 8.0, 1 / 32, 1e-3)
    assert heat_error(tr) < 1e-3


def test_crank_nicolson_is_more_accurate_than_backward_euler():
    be = heat_error(solve_dirichlet(HEAT, gauss, 8.0, 1 / 64, 1e-2))
    cn = heat_error(solve_dirichlet(HEAT, gauss, 8.0, 1 / 64, 1e-2, scheme="crank_nicolson"))
    assert cn < be / 5


def test_zero_data_gives_zero_trajectory():
    tr = expanding_ball_solve(HEAT, lambda X: 0 * X[..., 0], 1 / 16, 1e-2, radii=(4, 8))
    assert np.all(tr.frames == 0)


def test_chapman_kolmogorov_for_time_dependent_operator():
    op = affine_operator(1, 1.0, B=-1.0, B_profile={"profile": "sine", "base": 1.0,
                                                    "amplitude": 0.5})
    full = solve_dirichlet(op, gauss, 6.0, 1 / 32, 1e-2, s=0.0, T=1.0)
    half = solve_dirichlet(op, gauss, 6.0, 1 / 32, 1e-2, s=0.0, T=0.5)
    rest = solve_dirichlet(op, half.frames[-1], 6.0, 1 / 32, 1e-2, s=0.5, T=1.0)
    np.testing.assert_allclose(rest.frames[-1], full.frames[-1], atol=1e-12)


def test_localization_split_is_exact():
    err = localization_split_check(HEAT, lambda X: np.cos(X[..., 0]), [0.5], 6.0, 1 / 32, 1e-2)
    assert err < 1e-12


def test_sup_bound_with_positive_potential():
    op = affine_operator(1, 1.0, c=0.5)
    tr = solve_dirichlet(op, gauss, 8.0, 1 / 32, 1e-3)
    assert verify_sup_bound(tr, op) <= 1 + 10 * (1 / 32**2 + 1e-3)


def test_expanding_ball_monotone_for_nonnegative_data():
    tr = expanding_ball_solve(HEAT, lambda X: 1.0 + 0 * X[..., 0], 1 / 16, 1e-2,
                              radii=(4, 8, 16, 32))
    lad = tr.provenance["ladder"]
    assert lad["converged"]
    assert max(lad["monotonicity_defects"]) <= 10 / 16**2
    d = lad["differences"]
    assert all(b < a for a, b in zip(d, d[1:]))


def test_expanding_ball_raises_when_ladder_too_short():
    with pytest.raises(ConvergenceError) as exc:
        expanding_ball_solve(HEAT, lambda X: 1.0 + 0 * X[..., 0], 1 / 16, 1e-2, radii=(1, 2),
                             tol=1e-10)
    assert exc.value.differences


def test_sign_preserved_with_strong_polynomial_drift():
    op = operator_from_json(PRESETS["sect4-example-continuous"]["operator"])
    tr = expanding_ball_solve(op, gauss, 1 / 32, 1e-3, radii=(4, 8))
    assert sign_preservation_check(tr).passed
    assert verify_sup_bound(tr, op) <= 1 + 10 * (1 / 32**2 + 1e-3)


def test_upwinding_switches_on_for_large_drift():
    op = operator_from_json(PRESETS["sect4-example-continuous"]["operator"])
    _, n_up = assemble(op, 0.0, BallMesh(1, 8.0, 1 / 32), "auto")
    assert n_up > 0
    _, n_heat = assemble(HEAT, 0.0, BallMesh(1, 8.0, 1 / 32), "auto")
    assert n_heat == 0


def test_two_dimensional_heat():
    op = affine_operator(2, 0.25)
    tr = solve_dirichlet(op, gauss, 5.0, 1 / 16, 5e-3)
    u = make_oracle({"name": "heat_gaussian", "width": 1.0})
    g = tr.frame(0)
    m = g.region(1.0)
    assert np.abs(tr.frames[-1][m] - u(0.25, g.coords[m])).max() < 5e-3


def test_output_times_and_lookup():
    tr = solve_dirichlet(HEAT, gauss, 4.0, 1 / 16, 1e-2, output_times=[0.0, 0.25, 1.0])
    assert np.allclose(tr.times, [0.0, 0.25, 1.0])
    assert tr.at(0.25).values.shape == tr.frames[1].shape
    with pytest.raises(KeyError):
        tr.index(0.3)


def test_trajectory_save_load_round_trip(tmp_path):
    tr = solve_dirichlet(HEAT, gauss, 4.0, 1 / 16, 1e-1)
    tr.save(tmp_path / "traj")
    back = Trajectory.load(tmp_path / "traj")
    np.testing.assert_array_equal(back.frames, tr.frames)
    np.testing.assert_array_equal(back.times, tr.times)
    assert (back.radius, back.h, back.tau, back.scheme) == (tr.radius, tr.h, tr.tau, tr.scheme)
