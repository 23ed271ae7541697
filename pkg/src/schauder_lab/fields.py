"""Spatial jets and time profiles used to build coefficient fields.

A :class:`Jet` carries a scalar field together with its spatial derivatives
up to third order, evaluated on a batch of points.  Products and
compositions follow the Leibniz and Faa di Bruno rules, which is how the
polynomial-weight operators get exact derivative evaluators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import erf, sqrt

import numpy as np


@dataclass
class Jet:
    """Value and spatial derivatives (orders 1..3) on a batch of points.

    Shapes are ``S``, ``S+(N,)``, ``S+(N,N)`` and ``S+(N,N,N)`` where ``S``
    is the batch shape.
    """

    v: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray

    @property
    def dim(self) -> int:
        return self.d1.shape[-1]

    @classmethod
    def constant(cls, value, X) -> "Jet":
        X = np.asarray(X, dtype=float)
        S, N = X.shape[:-1], X.shape[-1]
        v = np.broadcast_to(np.asarray(value, dtype=float), S).copy()
        return cls(v, np.zeros(S + (N,)), np.zeros(S + (N, N)), np.zeros(S + (N, N, N)))

    @classmethod
    def coordinate(cls, X, j: int) -> "Jet":
        X = np.asarray(X, dtype=float)
        S, N = X.shape[:-1], X.shape[-1]
        d1 = np.zeros(S + (N,))
        d1[..., j] = 1.0
        return cls(X[..., j].copy(), d1, np.zeros(S + (N, N)), np.zeros(S + (N, N, N)))

    @classmethod
    def squared_norm(cls, X) -> "Jet":
        X = np.asarray(X, dtype=float)
        S, N = X.shape[:-1], X.shape[-1]
        d2 = np.broadcast_to(2.0 * np.eye(N), S + (N, N)).copy()
        return cls((X**2).sum(-1), 2.0 * X, d2, np.zeros(S + (N, N, N)))

    @classmethod
    def univariate(cls, X, j: int, g0, g1, g2, g3) -> "Jet":
        """Jet of ``x -> g(x_j)`` from the values of g and its derivatives."""
        X = np.asarray(X, dtype=float)
        S, N = X.shape[:-1], X.shape[-1]
        d1 = np.zeros(S + (N,))
        d2 = np.zeros(S + (N, N))
        d3 = np.zeros(S + (N, N, N))
        d1[..., j] = g1
        d2[..., j, j] = g2
        d3[..., j, j, j] = g3
        return cls(np.asarray(g0, dtype=float) * np.ones(S), d1, d2, d3)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.v + other.v, self.d1 + other.d1, self.d2 + other.d2, self.d3 + other.d3)
        return Jet(self.v + other, self.d1, self.d2, self.d3)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.d1, -self.d2, -self.d3)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            a = np.asarray(other, dtype=float)
            return Jet(self.v * a, self.d1 * a[..., None], self.d2 * a[..., None, None],
                       self.d3 * a[..., None, None, None])
        f, g = self, other
        fv, gv = f.v[..., None], g.v[..., None]
        d1 = f.d1 * gv + fv * g.d1
        d2 = (f.d2 * gv[..., None] + f.v[..., None, None] * g.d2
              + np.einsum("...i,...j->...ij", f.d1, g.d1)
              + np.einsum("...i,...j->...ij", g.d1, f.d1))
        d3 = (f.d3 * gv[..., None, None] + g.d3 * fv[..., None, None]
              + _sym3(np.einsum("...ij,...k->...ijk", f.d2, g.d1))
              + _sym3(np.einsum("...ij,...k->...ijk", g.d2, f.d1)))
        return Jet(f.v * g.v, d1, d2, d3)

    __rmul__ = __mul__

    def compose(self, p0, p1, p2, p3) -> "Jet":
        """Jet of ``phi(self)`` given phi and its first three derivatives at ``self.v``."""
        g = self
        p1_, p2_, p3_ = (np.asarray(p, dtype=float) for p in (p1, p2, p3))
        d1 = p1_[..., None] * g.d1
        outer = np.einsum("...i,...j->...ij", g.d1, g.d1)
        d2 = p2_[..., None, None] * outer + p1_[..., None, None] * g.d2
        d3 = (p3_[..., None, None, None] * np.einsum("...ij,...k->...ijk", outer, g.d1)
              + p2_[..., None, None, None] * _sym3(np.einsum("...ij,...k->...ijk", g.d2, g.d1))
              + p1_[..., None, None, None] * g.d3)
        return Jet(np.asarray(p0, dtype=float) * np.ones_like(g.v), d1, d2, d3)

    def power(self, k: int) -> "Jet":
        if k == 0:
            return Jet(np.ones_like(self.v), np.zeros_like(self.d1), np.zeros_like(self.d2),
                       np.zeros_like(self.d3))
        v = self.v
        p0 = v**k
        p1 = k * v ** (k - 1)
        p2 = k * (k - 1) * v ** (k - 2) if k >= 2 else np.zeros_like(v)
        p3 = k * (k - 1) * (k - 2) * v ** (k - 3) if k >= 3 else np.zeros_like(v)
        return self.compose(p0, p1, p2, p3)

    def derivative(self, order: int) -> np.ndarray:
        return (self.v, self.d1, self.d2, self.d3)[order]


def _sym3(a: np.ndarray) -> np.ndarray:
    """``A_ij B_k + A_ik B_j + A_jk B_i`` from the tensor ``a[...,i,j,k] = A_ij B_k``."""
    return a + np.swapaxes(a, -1, -2) + np.moveaxis(a, -1, -3)


# ---------------------------------------------------------------------------
# time profiles


@dataclass(frozen=True)
class TimeProfile:
    """Scalar function of time.

    ``constant``: ``value``.  ``sine``: ``value + amplitude*sin(2*pi*frequency*t)``.
    ``piecewise_constant``: ``values[k]`` on ``[jumps[k-1], jumps[k])``.
    ``sampler``: linear interpolation of ``samples`` at ``t = i/samples_per_unit``.
    """

    kind: str = "constant"
    value: float = 0.0
    amplitude: float = 0.0
    frequency: float = 1.0
    jumps: tuple = ()
    values: tuple = ()
    samples: tuple = ()
    samples_per_unit: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "sine", "piecewise_constant", "sampler"):
            raise ValueError(f"unknown time profile kind {self.kind!r}")
        if self.kind == "piecewise_constant":
            if len(self.values) != len(self.jumps) + 1:
                raise ValueError("piecewise_constant needs len(values) == len(jumps) + 1")
            if any(b <= a for a, b in zip(self.jumps, self.jumps[1:])):
                raise ValueError("jump times must be strictly increasing")
        if self.kind == "sampler" and (len(self.samples) < 2 or self.samples_per_unit <= 0):
            raise ValueError("sampler needs >= 2 samples and samples_per_unit > 0")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full(t.shape, float(self.value)) if t.shape else float(self.value)
        if self.kind == "sine":
            out = self.value + self.amplitude * np.sin(2 * np.pi * self.frequency * t)
            return out if t.shape else float(out)
        if self.kind == "piecewise_constant":
            idx = np.searchsorted(np.asarray(self.jumps, dtype=float), t, side="right")
            out = np.asarray(self.values, dtype=float)[idx]
            return out if t.shape else float(out)
        grid = np.arange(len(self.samples)) / self.samples_per_unit
        out = np.interp(t, grid, np.asarray(self.samples, dtype=float))
        return out if t.shape else float(out)

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "sine":
            return self.amplitude == 0.0
        if self.kind == "piecewise_constant":
            return len(set(self.values)) == 1
        return len(set(self.samples)) == 1

    def sup(self) -> float:
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "sine":
            return float(self.value + abs(self.amplitude))
        if self.kind == "piecewise_constant":
            return float(max(self.values))
        return float(max(self.samples))

    def inf(self) -> float:
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "sine":
            return float(self.value - abs(self.amplitude))
        if self.kind == "piecewise_constant":
            return float(min(self.values))
        return float(min(self.samples))

    def pieces(self, T: float):
        """Constant pieces ``(a, b, value)`` covering ``[0, T]``, or None when not piecewise constant."""
        if self.kind == "constant" or (self.kind == "sine" and self.amplitude == 0.0):
            return [(0.0, T, float(self.value))]
        if self.kind != "piecewise_constant":
            return None
        edges = [0.0] + [j for j in self.jumps if 0.0 < j < T] + [T]
        out = []
        for a, b in zip(edges[:-1], edges[1:]):
            out.append((a, b, float(self(0.5 * (a + b)))))
        return out

    def to_json(self):
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "sine":
            return {"profile": "sine", "base": self.value, "amplitude": self.amplitude,
                    "frequency": self.frequency}
        if self.kind == "piecewise_constant":
            return {"profile": "piecewise_constant", "jumps": list(self.jumps),
                    "values": list(self.values)}
        return {"profile": "sampler", "samples_per_unit": self.samples_per_unit,
                "samples": list(self.samples)}

    @classmethod
    def from_json(cls, obj) -> "TimeProfile":
        if isinstance(obj, (int, float)):
            return cls("constant", value=float(obj))
        kind = obj.get("profile", "constant")
        if kind == "constant":
            return cls("constant", value=float(obj["value"]))
        if kind == "sine":
            return cls("sine", value=float(obj.get("base", 0.0)),
                       amplitude=float(obj.get("amplitude", 0.0)),
                       frequency=float(obj.get("frequency", 1.0)))
        if kind == "piecewise_constant":
            return cls("piecewise_constant", jumps=tuple(float(j) for j in obj["jumps"]),
                       values=tuple(float(v) for v in obj["values"]))
        if kind == "sampler":
            return cls("sampler", samples=tuple(float(v) for v in obj["samples"]),
                       samples_per_unit=float(obj["samples_per_unit"]))
        raise ValueError(f"unknown time profile {kind!r}")


@dataclass(frozen=True)
class ScalarField:
    """``time(t) + amplitude * prod_i cos(frequency * x_i)``, with exact spatial jets."""

    time: TimeProfile = field(default_factory=TimeProfile)
    amplitude: float = 0.0
    frequency: float = 1.0

    def jet(self, t: float, X) -> Jet:
        X = np.asarray(X, dtype=float)
        base = Jet.constant(self.time(t), X)
        if self.amplitude == 0.0:
            return base
        w = self.frequency
        prod = None
        for j in range(X.shape[-1]):
            xj = X[..., j]
            c, s = np.cos(w * xj), np.sin(w * xj)
            factor = Jet.univariate(X, j, c, -w * s, -w**2 * c, w**3 * s)
            prod = factor if prod is None else prod * factor
        return base + prod * self.amplitude

    def value(self, t: float, X):
        X = np.asarray(X, dtype=float)
        out = self.time(t) + self.amplitude * np.prod(np.cos(self.frequency * X), axis=-1)
        return np.asarray(out, dtype=float)

    def sup(self) -> float:
        return self.time.sup() + abs(self.amplitude)

    def inf(self) -> float:
        return self.time.inf() - abs(self.amplitude)

    def sup_abs(self) -> float:
        return max(abs(self.sup()), abs(self.inf()))

    def to_json(self):
        return {"time": self.time.to_json(), "amplitude": self.amplitude,
                "frequency": self.frequency}

    @classmethod
    def from_json(cls, obj) -> "ScalarField":
        if isinstance(obj, (int, float)) or (isinstance(obj, dict) and "profile" in obj):
            return cls(TimeProfile.from_json(obj))
        return cls(TimeProfile.from_json(obj.get("time", 0.0)),
                   float(obj.get("amplitude", 0.0)), float(obj.get("frequency", 1.0)))


def truncated_gaussian_mass(t, n: float, T: float):
    """Mass of the kernel ``(n/4pi)^(1/2) exp(-n|t-s|^2/4)`` over ``s in [0, T]``."""
    t = np.asarray(t, dtype=float)
    from scipy.special import erf as verf

    rn = sqrt(n) / 2.0
    return 0.5 * (verf(rn * t) + verf(rn * (T - t)))


def kernel_floor(T: float) -> float:
    """Lower bound of the kernel mass over ``[0, T]`` valid for every ``n >= 1``."""
    return 0.5 * erf(T / 4.0)


def smoothstep(z):
    """Septic smoothstep: 0 for z <= 0, 1 for z >= 1, three continuous derivatives."""
    z = np.clip(np.asarray(z, dtype=float), 0.0, 1.0)
    return z**4 * (35.0 - 84.0 * z + 70.0 * z**2 - 20.0 * z**3)


def smoothstep_derivatives(z):
    """First three derivatives of :func:`smoothstep` (zero outside ``(0, 1)``)."""
    z = np.asarray(z, dtype=float)
    inside = (z > 0) & (z < 1)
    zc = np.clip(z, 0.0, 1.0)
    d1 = 140.0 * zc**3 * (1 - zc) ** 3
    d2 = 420.0 * zc**2 * (1 - zc) ** 2 * (1 - 2 * zc)
    d3 = 840.0 * zc * (1 - zc) * (1 - 5 * zc + 5 * zc**2)
    return tuple(np.where(inside, d, 0.0) for d in (d1, d2, d3))
