import numpy as np
import pytest
from hypothesis import given, strategies as st

from corpus import INTERPOLATION_CORPUS
from schauder_lab.holder_norms import (GridFunction, InsufficientMarginError, ck_alpha_norm,
                                       derivative, holder_seminorm,
                                       interpolation_inequality_check, multi_indices, sup_norm)


def grid(fn, dim=1, R=2.0, h=1 / 64):
    return GridFunction.from_function(fn, dim, R, h)


def test_second_derivative_of_square_is_two():
    g = grid(lambda X: X[..., 0] ** 2)
    d2 = derivative(g, (2,))
    m = d2.region(1.5)
    np.testing.assert_allclose(d2.values[m], 2.0, atol=1e-10)


def test_mixed_derivative_in_two_dimensions():
    g = grid(lambda X: X[..., 0] ** 2 * X[..., 1], dim=2, R=1.0, h=1 / 16)
    d = derivative(g, (1, 1))
    m = d.region(0.5)
    np.testing.assert_allclose(d.values[m], 2 * d.coords[m][:, 0], atol=1e-10)


def test_third_derivative_fourth_order_accuracy():
    errs = []
    for h in (1 / 16, 1 / 32):
        g = grid(lambda X: np.sin(X[..., 0]), h=h)
        d3 = derivative(g, (3,))
        m = d3.region(1.0)
        errs.append(np.abs(d3.values[m] + np.cos(d3.coords[m][:, 0])).max())
    assert errs[1] < errs[0] / 10


def test_derivative_refuses_when_margin_exhausted():
    g = GridFunction(np.zeros(9), 4 * 1 / 8 * 1.0, 1 / 8)
    with pytest.raises(InsufficientMarginError):
        derivative(derivative(g, (2,)), (3,))


def test_multi_indices_count():
    assert len(multi_indices(2, 2)) == 3
    assert len(multi_indices(2, 3)) == 4
    assert multi_indices(1, 3) == [(3,)]


def test_sqrt_abs_seminorm_is_one():
    # |sqrt|x| - sqrt|y|| <= |x-y|^(1/2) with equality at y = 0
    g = grid(lambda X: np.sqrt(np.abs(X[..., 0])))
    assert holder_seminorm(g, 0.5, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_lipschitz_seminorm_of_linear_function():
    g = grid(lambda X: 3 * X[..., 0])
    assert holder_seminorm(g, 1.0, 1.0) == pytest.approx(3.0, rel=1e-12)


def test_seminorm_of_constant_is_zero():
    assert holder_seminorm(grid(lambda X: 0 * X[..., 0] + 2), 0.3, 1.0) == 0.0


def test_ck_alpha_norm_of_sine():
    g = grid(lambda X: np.sin(X[..., 0]))
    est = ck_alpha_norm(g, 1, 0.0, 1.0)
    # sup|sin| + sup|cos| on [-1, 1]
    assert est.value == pytest.approx(np.sin(1.0) + 1.0, abs=1e-8)
    assert set(est.as_row()) >= {"k", "alpha", "R_eval", "value"}


def test_sampled_seminorm_is_reproducible_and_bounded_by_exhaustive():
    g = grid(lambda X: np.sin(3 * X[..., 0]) * np.exp(-X[..., 1] ** 2), dim=2, R=1.5, h=1 / 16)
    full = holder_seminorm(g, 0.5, 1.0)
    a = holder_seminorm(g, 0.5, 1.0, pair_cap=2000, seed=3)
    b = holder_seminorm(g, 0.5, 1.0, pair_cap=2000, seed=3)
    assert a == b
    assert a <= full + 1e-12
    assert a >= 0.8 * full


@given(st.floats(-5, 5), st.sampled_from([(0, 0.5), (1, 0.25), (2, 0.5)]))
def test_norm_is_absolutely_homogeneous(lam, ka):
    k, a = ka
    g = grid(lambda X: np.exp(-X[..., 0] ** 2), h=1 / 32)
    base = ck_alpha_norm(g, k, a, 1.0).value
    scaled = ck_alpha_norm(g.with_values(lam * g.values), k, a, 1.0).value
    assert scaled == pytest.approx(abs(lam) * base, rel=1e-10, abs=1e-12)


@given(st.integers(1, 4), st.integers(1, 4), st.sampled_from([(0, 0.5), (1, 0.5), (2, 0.25)]))
def test_norm_triangle_inequality(w1, w2, ka):
    k, a = ka
    f = grid(lambda X: np.sin(w1 * X[..., 0]), h=1 / 32)
    g = grid(lambda X: np.cos(w2 * X[..., 0]) * np.exp(-X[..., 0] ** 2), h=1 / 32)
    nf, ng = (ck_alpha_norm(u, k, a, 1.0).value for u in (f, g))
    nfg = ck_alpha_norm(f.with_values(f.values + g.values), k, a, 1.0).value
    assert nfg <= nf + ng + 1e-10


def test_sup_norm_region():
    g = grid(lambda X: X[..., 0])
    assert sup_norm(g) == pytest.approx(2.0)
    assert sup_norm(g, 1.0) == pytest.approx(1.0)


def test_grid_function_save_load_round_trip(tmp_path):
    g = grid(lambda X: np.exp(-(X**2).sum(-1)), dim=2, R=1.0, h=1 / 8)
    g.save(tmp_path / "g")
    back = GridFunction.load(tmp_path / "g")
    assert back.radius == g.radius and back.h == g.h and back.margin == g.margin
    np.testing.assert_array_equal(back.values, g.values)
    assert (tmp_path / "g.bin").stat().st_size == g.values.size * 8


def test_crop_and_coarsen_keep_values():
    g = grid(lambda X: X[..., 0] ** 3, R=2.0, h=1 / 16)
    c = g.crop(1.0)
    np.testing.assert_allclose(c.values, c.coords[..., 0] ** 3)
    k = g.coarsen()
    assert k.h == 2 * g.h
    np.testing.assert_allclose(k.values, k.coords[..., 0] ** 3)


def test_interpolation_ratio_zero_function():
    assert interpolation_inequality_check(grid(lambda X: 0 * X[..., 0]), 0.5, 1.0) == 0.0


@pytest.mark.parametrize("name", sorted(INTERPOLATION_CORPUS))
def test_interpolation_ratio_bounded_and_mesh_stable(name):
    f = INTERPOLATION_CORPUS[name]
    r1 = interpolation_inequality_check(grid(f, h=1 / 64), 0.5, 1.0)
    r2 = interpolation_inequality_check(grid(f, h=1 / 128), 0.5, 1.0)
    assert 0 < r1 <= 10
    assert abs(r2 - r1) <= 0.05 * r1
