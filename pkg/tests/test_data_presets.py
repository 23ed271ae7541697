import numpy as np
import pytest

from schauder_lab.data import DATA, SOURCES, make_datum, make_oracle, make_source
from schauder_lab.experiments import KINDS, ExperimentConfig, build_operator
from schauder_lab.presets import PRESETS, preset_config


def test_datum_references():
    X = np.array([[0.0], [1.0]])
    np.testing.assert_allclose(make_datum("gaussian")(X), [1.0, np.exp(-1)])
    np.testing.assert_allclose(make_datum({"name": "constant", "value": 2.5})(X), 2.5)
    np.testing.assert_allclose(make_datum({"name": "tanh_step", "scale": 1.0})(X),
                               [0.0, np.tanh(1.0)])
    with pytest.raises(ValueError, match="unknown datum"):
        make_datum("nope")
    with pytest.raises(ValueError):
        make_datum({"width": 1.0})


def test_source_references():
    X = np.array([[np.pi / 2]])
    assert make_source(None) is None and make_source("zero") is None
    assert make_source({"name": "sin_decay"})(1.0, X)[0] == pytest.approx(np.exp(-1))
    assert make_source({"name": "cos_linear"})(2.0, np.zeros((1, 1)))[0] == pytest.approx(3.0)
    with pytest.raises(ValueError, match="unknown source"):
        make_source("nope")


def test_registries_cover_all_callables():
    X = np.zeros((3, 2))
    for name in DATA:
        assert make_datum(name)(X).shape == (3,)
    for name in SOURCES:
        g = make_source(name)
        assert g is None or g(0.5, X).shape == (3,)


def _residual(u, t, x, rhs):
    dt, dx = 1e-4, 1e-3
    X = np.array([[x]])
    ut = (u(t + dt, X) - u(t - dt, X)) / (2 * dt)
    ux = (u(t, X + dx) - u(t, X - dx)) / (2 * dx)
    uxx = (u(t, X + dx) - 2 * u(t, X) + u(t, X - dx)) / dx**2
    return float(abs(ut - rhs(x, ux, uxx))[0])


@pytest.mark.parametrize("t,x", [(0.3, 0.2), (0.8, -1.1), (3.5, 0.7)])
def test_heat_oracle_solves_two_stage_equation(t, x):
    ref = PRESETS["two-stage-heat"]["oracle"]
    u = make_oracle(ref)
    q = 1.0 if t < 2.5 else 2.0
    assert _residual(u, t, x, lambda x, ux, uxx: q * uxx) < 1e-5


@pytest.mark.parametrize("t,x", [(0.3, 0.2), (0.8, -1.1)])
def test_ou_oracle_solves_equation(t, x):
    u = make_oracle({"name": "ou_gaussian", "width": 2.0})
    assert _residual(u, t, x, lambda x, ux, uxx: uxx - x * ux) < 1e-5
    X = np.array([[x]])
    np.testing.assert_allclose(u(0.0, X), np.exp(-x**2 / 2))


@pytest.mark.parametrize("name", sorted(PRESETS))
@pytest.mark.parametrize("kind", KINDS)
def test_every_preset_builds_for_every_kind(name, kind):
    cfg = preset_config(name, kind)
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.preset == name
    op = build_operator(cfg)
    assert op.dim == 1
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg


def test_preset_overrides_and_unknown_name():
    cfg = preset_config("heat-1d", "solve", h=0.125, radii=(2.0, 4.0))
    assert cfg.h == 0.125 and cfg.radii == (2.0, 4.0)
    with pytest.raises(KeyError):
        preset_config("nope", "solve")
