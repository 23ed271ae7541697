"""Named initial data and source terms, so experiment configs stay pure JSON.

A datum is referenced as ``{"name": ..., **params}`` and resolves to a
vectorized callable ``f(X)``; a source resolves to ``g(t, X)``.  A bare
string is shorthand for a reference without parameters.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np


def _sq(X, center=None):
    X = np.asarray(X, dtype=float)
    if center is not None:
        X = X - np.asarray(center, dtype=float)
    return (X**2).sum(-1)


def _gaussian(width=1.0, amplitude=1.0, center=None):
    return lambda X: amplitude * np.exp(-_sq(X, center) / width)


def _constant(value=1.0):
    return lambda X: np.full(np.asarray(X).shape[:-1], float(value))


def _tanh_step(scale=1.0 / 512, axis=0):
    """A smoothed jump across ``x_axis = 0``; bounded with ``C^0`` norm 1 for any scale."""
    return lambda X: np.tanh(np.asarray(X, dtype=float)[..., axis] / scale)


def _abs_gaussian(axis=0, width=1.0):
    """``|x_axis| exp(-|x|^2/width)``: Lipschitz with a kink at the origin."""
    return lambda X: np.abs(np.asarray(X, dtype=float)[..., axis]) * np.exp(-_sq(X) / width)


def _cos_product(frequency=1.0, amplitude=1.0):
    return lambda X: amplitude * np.prod(np.cos(frequency * np.asarray(X, dtype=float)), axis=-1)


def _sin_gaussian(frequency=1.0, width=4.0, axis=0):
    return lambda X: (np.sin(frequency * np.asarray(X, dtype=float)[..., axis])
                      * np.exp(-_sq(X) / width))


DATA = {
    "zero": lambda: _constant(0.0),
    "constant": _constant,
    "gaussian": _gaussian,
    "tanh_step": _tanh_step,
    "abs_gaussian": _abs_gaussian,
    "cos_product": _cos_product,
    "sin_gaussian": _sin_gaussian,
}


def _zero_source():
    return lambda t, X: np.zeros(np.asarray(X).shape[:-1])


def _sin_decay(frequency=1.0, rate=1.0, axis=0):
    """``sin(frequency x_axis) exp(-rate t)``."""
    return lambda t, X: (np.sin(frequency * np.asarray(X, dtype=float)[..., axis])
                         * np.exp(-rate * t))


def _cos_linear(frequency=1.0, slope=1.0, axis=0):
    """``cos(frequency x_axis) (1 + slope t)``."""
    return lambda t, X: (np.cos(frequency * np.asarray(X, dtype=float)[..., axis])
                         * (1.0 + slope * t))


def _gaussian_pulse(width=1.0, amplitude=1.0, center=None):
    return lambda t, X: amplitude * np.exp(-_sq(X, center) / width) + 0.0 * t


SOURCES = {
    "zero": _zero_source,
    "sin_decay": _sin_decay,
    "cos_linear": _cos_linear,
    "gaussian_pulse": _gaussian_pulse,
}


def _split_ref(ref):
    if isinstance(ref, str):
        return ref, {}
    if not isinstance(ref, dict) or "name" not in ref:
        raise ValueError(f"bad data reference {ref!r}")
    params = {k: v for k, v in ref.items() if k != "name"}
    return ref["name"], params


def make_datum(ref) -> Callable:
    """Resolve a datum reference to ``f(X)``."""
    name, params = _split_ref(ref)
    if name not in DATA:
        raise ValueError(f"unknown datum {name!r}; choose from {sorted(DATA)}")
    return DATA[name](**params)


def make_source(ref) -> Optional[Callable]:
    """Resolve a source reference to ``g(t, X)``; ``None`` and ``"zero"`` give None."""
    if ref is None:
        return None
    name, params = _split_ref(ref)
    if name not in SOURCES:
        raise ValueError(f"unknown source {name!r}; choose from {sorted(SOURCES)}")
    if name == "zero":
        return None
    return SOURCES[name](**params)


# ---------------------------------------------------------------------------
# closed-form solutions used as oracles


def _heat_gaussian(width=1.0, q_profile=1.0):
    """Solution of ``u_t = q(t) Lap u`` from ``exp(-|x|^2/width)``.

    With ``S(t) = int_0^t q`` the solution is
    ``(width/(width+4S))^(N/2) exp(-|x|^2/(width+4S))``; ``q`` is a
    piecewise constant (or constant) profile.
    """
    from .fields import TimeProfile

    prof = TimeProfile.from_json(q_profile)

    def S(t):
        pieces = prof.pieces(float(t))
        if pieces is None:
            raise ValueError("heat_gaussian oracle needs a piecewise constant profile")
        return sum((b - a) * v for a, b, v in pieces)

    def u(t, X):
        X = np.asarray(X, dtype=float)
        a = width + 4.0 * S(t)
        return (width / a) ** (X.shape[-1] / 2.0) * np.exp(-_sq(X) / a)

    return u


def _ou_gaussian(width=1.0, rate=1.0):
    """Solution of ``u_t = Lap u - rate x.Du`` from ``exp(-|x|^2/width)``.

    The underlying diffusion has mean ``x exp(-rate t)`` and per-coordinate
    variance ``(1 - exp(-2 rate t))/rate``.
    """

    def u(t, X):
        X = np.asarray(X, dtype=float)
        var = (1.0 - np.exp(-2.0 * rate * t)) / rate if t > 0 else 0.0
        a = width + 2.0 * var
        return (width / a) ** (X.shape[-1] / 2.0) * np.exp(-_sq(X) * np.exp(-2 * rate * t) / a)

    return u


ORACLES = {
    "heat_gaussian": _heat_gaussian,
    "ou_gaussian": _ou_gaussian,
}


def make_oracle(ref) -> Optional[Callable]:
    """Resolve an oracle reference to ``u(t, X)``; None stays None."""
    if ref is None:
        return None
    name, params = _split_ref(ref)
    if name not in ORACLES:
        raise ValueError(f"unknown oracle {name!r}; choose from {sorted(ORACLES)}")
    return ORACLES[name](**params)
