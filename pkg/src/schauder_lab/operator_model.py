"""Second-order operators with unbounded coefficients and their hypothesis checks.

An :class:`OperatorSpec` bundles vectorized evaluators for the diffusion
matrix ``Q(t, x)``, the drift ``b(t, x)`` and the potential ``c(t, x)``,
optional exact derivative evaluators, and the Lyapunov pair used by the
checker.  Three families are provided: the polynomial-weight family
(:func:`build_poly_example`), an affine family (constant diffusion matrix,
linear drift, spatially constant potential, each with a time profile) and
spline-interpolated tables.

Existence of the constants required by the hypotheses is tested by
maximizing the relevant ratios over sample boxes of radius ``R`` and ``2R``;
a ratio whose maximum grows by less than 5% under doubling is declared
bounded.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fields import Jet, ScalarField, TimeProfile
from .holder_norms import GridFunction, derivative

#: Relative growth of a fitted ratio under box doubling still accepted as bounded.
GROWTH_TOL = 0.05
#: Safety inflation applied to fitted constants.
INFLATION = 1.10
#: Positive floor for constants whose fitted ratio is nonpositive.
CONST_FLOOR = 1e-6
#: Positive floor for the potential-derivative evaluator.
RHO_FLOOR = 1e-6
#: Candidate values searched for the compatibility constants.
L_LADDER = tuple(4.0 ** -k for k in range(9))


def _component_axes_first(d: np.ndarray, batch_ndim: int, order: int) -> np.ndarray:
    """Move the two trailing matrix axes in front of the derivative axes."""
    if order == 0:
        return d
    return np.moveaxis(d, [-2, -1], [batch_ndim, batch_ndim + 1])


def _fd_tensor(fn, X, order, h):
    """Nested fourth-order central differences; derivative axes are appended last."""
    if order == 0:
        return np.asarray(fn(X), dtype=float)
    N = X.shape[-1]
    offs = (-2, -1, 1, 2)
    ws = (1.0 / 12, -8.0 / 12, 8.0 / 12, -1.0 / 12)
    parts = []
    for i in range(N):
        e = np.zeros(N)
        e[i] = 1.0
        acc = None
        for o, w in zip(offs, ws):
            val = w * _fd_tensor(fn, X + o * h[..., None] * e, order - 1, h)
            acc = val if acc is None else acc + val
        parts.append(acc / h.reshape(h.shape + (1,) * (acc.ndim - h.ndim)))
    return np.stack(parts, axis=-1)


def fd_step(X, order: int) -> np.ndarray:
    return 1e-3 * 4.0 ** (order - 1) * (1.0 + np.sqrt((np.asarray(X) ** 2).sum(-1)))


@dataclass(frozen=True)
class PolyExampleSpec:
    """Polynomial-weight family.

    ``q_ij = (1+|x|^2)^p q0_ij(t,x)`` with ``q0 = scale(t,x) * matrix``,
    ``b_j = b0(t) x_j (1+|x|^2)^q`` and ``c = c0(t,x) - |x|^(2r)`` (``0^0 = 1``).
    ``regime`` is ``"continuous"`` or ``"measurable"`` (piecewise constant in time).
    """

    N: int = 1
    T: float = 1.0
    p: int = 0
    q: int = 1
    r: int = 1
    Q0_matrix: tuple = ((1.0,),)
    Q0_scale: ScalarField = field(default_factory=lambda: ScalarField(TimeProfile("constant", 1.0)))
    b0: TimeProfile = field(default_factory=lambda: TimeProfile("constant", -1.0))
    c0: ScalarField = field(default_factory=ScalarField)
    regime: str = "continuous"

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.Q0_matrix, dtype=float).reshape(self.N, self.N)

    @property
    def nu0(self) -> float:
        return self.Q0_scale.inf() * float(np.linalg.eigvalsh(self.matrix).min())

    def to_json(self) -> dict:
        return {"family": "poly_example", "N": self.N, "T": self.T, "p": self.p, "q": self.q,
                "r": self.r, "Q0": {"matrix": self.matrix.tolist(),
                                    "scale": self.Q0_scale.to_json()},
                "b0": self.b0.to_json(), "c0": self.c0.to_json(), "regime": self.regime}

    @classmethod
    def from_json(cls, obj: dict) -> "PolyExampleSpec":
        N = int(obj["N"])
        Q0 = obj.get("Q0", 1.0)
        scale = ScalarField(TimeProfile("constant", 1.0))
        if isinstance(Q0, dict):
            matrix = Q0.get("matrix", np.eye(N).tolist())
            if "scale" in Q0:
                scale = ScalarField.from_json(Q0["scale"])
        else:
            matrix = Q0
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim == 0:
            matrix = matrix * np.eye(N)
        return cls(N=N, T=float(obj["T"]), p=int(obj["p"]), q=int(obj["q"]), r=int(obj["r"]),
                   Q0_matrix=tuple(map(tuple, matrix.reshape(N, N).tolist())), Q0_scale=scale,
                   b0=TimeProfile.from_json(obj.get("b0", -1.0)),
                   c0=ScalarField.from_json(obj.get("c0", 0.0)),
                   regime=obj.get("regime", "continuous"))


@dataclass(frozen=True)
class OperatorSpec:
    """Coefficients of ``A u = sum q_ij D_ij u + sum b_j D_j u + c u``.

    Evaluators take a scalar time and points ``X`` of shape ``S + (N,)``.
    ``diffusion`` returns ``S + (N, N)``, ``drift`` ``S + (N,)`` and
    ``potential`` ``S``.  The optional ``*_jet(t, X, order)`` evaluators
    return derivative tensors with component axes first and derivative axes
    last; when absent, nested finite differences are used instead.
    """

    dim: int
    horizon: float
    diffusion: Callable
    drift: Callable
    potential: Callable
    diffusion_jet: Optional[Callable] = None
    drift_jet: Optional[Callable] = None
    potential_jet: Optional[Callable] = None
    nu0: Optional[float] = None
    c0: Optional[float] = None
    lyapunov: Optional[Callable] = None
    lyapunov_lambda: float = 1.0
    jump_times: tuple = ()
    time_independent: bool = False
    piecewise_in_time: bool = False
    name: str = "operator"
    description: Optional[dict] = None
    poly: Optional[PolyExampleSpec] = None

    @property
    def analytic_derivatives(self) -> bool:
        return None not in (self.diffusion_jet, self.drift_jet, self.potential_jet)

    def coefficient_derivative(self, which: str, t: float, X, order: int) -> np.ndarray:
        """Order-``order`` spatial derivative tensor of ``which`` in {"diffusion", "drift", "potential"}."""
        X = np.asarray(X, dtype=float)
        value = getattr(self, which)
        if order == 0:
            return np.asarray(value(t, X), dtype=float)
        jet = getattr(self, which + "_jet")
        if jet is not None:
            return np.asarray(jet(t, X, order), dtype=float)
        return _fd_tensor(lambda Y: value(t, Y), X, order, fd_step(X, order))

    def fd_noise(self, order: int, scale: float) -> float:
        """Roundoff level of the finite-difference fallback (0 with exact derivatives)."""
        if self.analytic_derivatives or order == 0:
            return 0.0
        return 1e-14 * (1.0 + abs(scale)) * 4.0 ** order / (1e-3 * 4.0 ** (order - 1)) ** order

    def lyapunov_jet(self, X):
        """Lyapunov function with gradient and Hessian; defaults to ``1 + |x|^2``."""
        X = np.asarray(X, dtype=float)
        if self.lyapunov is not None:
            return self.lyapunov(X)
        phi = 1.0 + (X**2).sum(-1)
        hess = np.broadcast_to(2.0 * np.eye(self.dim), X.shape[:-1] + (self.dim, self.dim))
        return phi, 2.0 * X, hess

    def apply_to_lyapunov(self, t: float, X) -> np.ndarray:
        phi, grad, hess = self.lyapunov_jet(X)
        Q = self.diffusion(t, X)
        b = self.drift(t, X)
        c = self.potential(t, X)
        return np.einsum("...ij,...ij->...", Q, hess) + (b * grad).sum(-1) + c * phi

    def to_json(self) -> dict:
        if self.description is None:
            raise ValueError("operator has no JSON description")
        return self.description

    def config_hash(self) -> str:
        if self.description is None:
            return "unhashable:" + self.name
        blob = json.dumps(self.description, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# polynomial-weight family


def _poly_kappa3(spec: PolyExampleSpec) -> float:
    """``sup_{s>=0} 2A(1+s)^p + 2 b0 s (1+s)^q - s^r (1+s)`` with ``A`` bounding ``Tr Q0``.

    Returns ``inf`` when the polynomial is unbounded above.
    """
    P = np.polynomial.Polynomial
    one_s = P([1.0, 1.0])
    s = P([0.0, 1.0])
    A = max(spec.Q0_scale.sup() * float(np.trace(spec.matrix)), 0.0)
    poly = 2 * A * one_s**spec.p + 2 * spec.b0.sup() * s * one_s**spec.q - s**spec.r * one_s
    coef = poly.trim().coef
    if len(coef) > 1 and coef[-1] > 0:
        return float("inf")
    cand = [0.0] + [z.real for z in poly.deriv().roots() if abs(z.imag) < 1e-9 and z.real > 0]
    return float(max(poly(c) for c in cand))


def build_poly_example(spec: PolyExampleSpec, validate: bool = True) -> OperatorSpec:
    """Operator of the polynomial-weight family.

    With ``validate=True`` (default) the structural requirements are
    enforced: ``p <= q``, ``b0 < 0`` on sampled times, and a positive
    ellipticity floor.  ``validate=False`` builds mutants for negative tests.
    The Lyapunov pair is ``phi = 1 + |x|^2`` with
    ``lambda = sup|c0| + kappa3``.
    """
    N, p, q, r = spec.N, spec.p, spec.q, spec.r
    if N not in (1, 2):
        raise ValueError("only N = 1 or 2 is supported")
    if min(p, q, r) < 0:
        raise ValueError("exponents must be nonnegative integers")
    M = spec.matrix
    if validate:
        if p > q:
            raise ValueError(f"need p <= q, got p={p}, q={q}")
        tt = np.linspace(0.0, spec.T, 257)
        if np.any(spec.b0(tt) >= 0):
            raise ValueError("b0 must be negative at every sampled time")
        if not np.allclose(M, M.T):
            raise ValueError("Q0 matrix must be symmetric")
        if spec.nu0 <= 0:
            raise ValueError("Q0 must be uniformly positive definite")
        if spec.regime == "continuous" and spec.b0.kind == "piecewise_constant" \
                and not spec.b0.is_constant:
            raise ValueError("continuous regime requires continuous time profiles")

    def weight(X, k):
        return (Jet.squared_norm(X) + 1.0).power(k)

    def scalar_jet(t, X):
        return spec.Q0_scale.jet(t, X) * weight(X, p)

    def diffusion(t, X):
        X = np.asarray(X, dtype=float)
        w = (1.0 + (X**2).sum(-1)) ** p
        return (w * spec.Q0_scale.value(t, X))[..., None, None] * M

    def diffusion_jet(t, X, order):
        X = np.asarray(X, dtype=float)
        D = scalar_jet(t, X).derivative(order)
        return _component_axes_first(D[..., None, None] * M, X.ndim - 1, order)

    def drift(t, X):
        X = np.asarray(X, dtype=float)
        w = (1.0 + (X**2).sum(-1)) ** q
        return spec.b0(t) * X * w[..., None]

    def drift_jet(t, X, order):
        X = np.asarray(X, dtype=float)
        wq = weight(X, q)
        comps = [(Jet.coordinate(X, j) * wq).derivative(order) for j in range(N)]
        return spec.b0(t) * np.stack(comps, axis=X.ndim - 1)

    def potential(t, X):
        X = np.asarray(X, dtype=float)
        s = (X**2).sum(-1)
        return spec.c0.value(t, X) - (s**r if r > 0 else np.ones_like(s))

    def potential_jet(t, X, order):
        X = np.asarray(X, dtype=float)
        return (spec.c0.jet(t, X) - Jet.squared_norm(X).power(r)).derivative(order)

    kappa3 = _poly_kappa3(spec)
    c0_sup = spec.c0.sup_abs()
    lam = c0_sup + kappa3 if np.isfinite(kappa3) else c0_sup + 1.0
    jumps = tuple(sorted(set(spec.b0.jumps) | set(spec.Q0_scale.time.jumps)
                         | set(spec.c0.time.jumps)))
    time_indep = spec.b0.is_constant and spec.Q0_scale.time.is_constant \
        and spec.c0.time.is_constant
    c_sup = spec.c0.sup() - (0.0 if r > 0 else 1.0)
    return OperatorSpec(
        dim=N, horizon=spec.T, diffusion=diffusion, drift=drift, potential=potential,
        diffusion_jet=diffusion_jet, drift_jet=drift_jet, potential_jet=potential_jet,
        nu0=spec.nu0, c0=c_sup, lyapunov=None, lyapunov_lambda=float(lam),
        jump_times=jumps, time_independent=time_indep,
        piecewise_in_time=all(pr.pieces(spec.T) is not None
                              for pr in (spec.b0, spec.Q0_scale.time, spec.c0.time)),
        name=f"poly_p{p}_q{q}_r{r}",
        description=spec.to_json() if validate else dict(spec.to_json(), validate=False),
        poly=spec)


# ---------------------------------------------------------------------------
# affine family


def affine_operator(N: int = 1, T: float = 1.0, Q=1.0, Q_profile=1.0, B=0.0, B_profile=1.0,
                    b_offset=0.0, c=0.0, name: str = "affine") -> OperatorSpec:
    """``Q(t) = q(t) M``, ``b(t, x) = beta(t) B x + b_offset``, ``c(t) = gamma(t)``.

    Profiles accept anything :meth:`TimeProfile.from_json` accepts.
    """
    M = np.asarray(Q, dtype=float)
    M = M * np.eye(N) if M.ndim == 0 else M.reshape(N, N)
    Bm = np.asarray(B, dtype=float)
    Bm = Bm * np.eye(N) if Bm.ndim == 0 else Bm.reshape(N, N)
    off = np.broadcast_to(np.asarray(b_offset, dtype=float), (N,)).copy()
    qp = Q_profile if isinstance(Q_profile, TimeProfile) else TimeProfile.from_json(Q_profile)
    bp = B_profile if isinstance(B_profile, TimeProfile) else TimeProfile.from_json(B_profile)
    cp = c if isinstance(c, TimeProfile) else TimeProfile.from_json(c)
    if not np.allclose(M, M.T):
        raise ValueError("diffusion matrix must be symmetric")

    def diffusion(t, X):
        X = np.asarray(X, dtype=float)
        return np.broadcast_to(qp(t) * M, X.shape[:-1] + (N, N)).copy()

    def diffusion_jet(t, X, order):
        X = np.asarray(X, dtype=float)
        return np.zeros(X.shape[:-1] + (N, N) + (N,) * order)

    def drift(t, X):
        X = np.asarray(X, dtype=float)
        return bp(t) * np.einsum("jk,...k->...j", Bm, X) + off

    def drift_jet(t, X, order):
        X = np.asarray(X, dtype=float)
        S = X.shape[:-1]
        if order == 1:
            return np.broadcast_to(bp(t) * Bm, S + (N, N)).copy()
        return np.zeros(S + (N,) + (N,) * order)

    def potential(t, X):
        X = np.asarray(X, dtype=float)
        return np.full(X.shape[:-1], cp(t))

    def potential_jet(t, X, order):
        X = np.asarray(X, dtype=float)
        return np.zeros(X.shape[:-1] + (N,) * order)

    desc = {"family": "affine", "N": N, "T": T, "Q": M.tolist(), "Q_profile": qp.to_json(),
            "B": Bm.tolist(), "B_profile": bp.to_json(), "b_offset": off.tolist(),
            "c": cp.to_json(), "name": name}
    jumps = tuple(sorted(set(qp.jumps) | set(bp.jumps) | set(cp.jumps)))
    return OperatorSpec(
        dim=N, horizon=T, diffusion=diffusion, drift=drift, potential=potential,
        diffusion_jet=diffusion_jet, drift_jet=drift_jet, potential_jet=potential_jet,
        nu0=qp.inf() * float(np.linalg.eigvalsh(M).min()), c0=cp.sup(),
        jump_times=jumps, time_independent=qp.is_constant and bp.is_constant and cp.is_constant,
        piecewise_in_time=all(pr.pieces(T) is not None for pr in (qp, bp, cp)),
        name=name, description=desc)


# ---------------------------------------------------------------------------
# tabulated family


class _Table:
    """Spline in space (held constant outside the table), linear in time."""

    def __init__(self, axes, times, data, comp_shape, order):
        from scipy.interpolate import RectBivariateSpline, make_interp_spline

        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.N = len(self.axes)
        self.times = None if times is None else np.asarray(times, dtype=float)
        data = np.asarray(data, dtype=float)
        if self.times is None:
            data = data[None]
        grid_shape = tuple(len(a) for a in self.axes)
        data = data.reshape((data.shape[0],) + grid_shape + comp_shape)
        self.comp_shape = comp_shape
        self.splines = []
        for slab in data:
            comps = {}
            for idx in np.ndindex(*comp_shape) if comp_shape else [()]:
                vals = slab[(Ellipsis,) + idx]
                if self.N == 1:
                    k = min(order, len(self.axes[0]) - 1)
                    comps[idx] = make_interp_spline(self.axes[0], vals, k=k)
                else:
                    k = min(order, 5, len(self.axes[0]) - 1, len(self.axes[1]) - 1)
                    comps[idx] = RectBivariateSpline(self.axes[0], self.axes[1], vals, kx=k, ky=k)
            self.splines.append(comps)

    def _eval_slab(self, comps, X, order):
        S = X.shape[:-1]
        lo = np.array([a[0] for a in self.axes])
        hi = np.array([a[-1] for a in self.axes])
        inside = np.all((X >= lo) & (X <= hi), axis=-1)
        Xc = np.clip(X, lo, hi)
        out = np.zeros(S + self.comp_shape + (self.N,) * order)
        for idx, spl in comps.items():
            for didx in np.ndindex(*((self.N,) * order)) if order else [()]:
                counts = [sum(1 for d in didx if d == a) for a in range(self.N)]
                if self.N == 1:
                    val = spl(Xc[..., 0], nu=counts[0]) if counts[0] <= spl.k else 0.0 * Xc[..., 0]
                else:
                    if counts[0] > spl.degrees[0] or counts[1] > spl.degrees[1]:
                        val = np.zeros(S)
                    else:
                        val = spl.ev(Xc[..., 0], Xc[..., 1], dx=counts[0], dy=counts[1])
                if order:
                    val = np.where(inside, val, 0.0)
                out[(Ellipsis,) + idx + didx] = val
        return out

    def __call__(self, t, X, order=0):
        X = np.asarray(X, dtype=float)
        if self.times is None or len(self.times) == 1:
            return self._eval_slab(self.splines[0], X, order)
        tt = float(np.clip(t, self.times[0], self.times[-1]))
        k = int(np.clip(np.searchsorted(self.times, tt, side="right") - 1, 0, len(self.times) - 2))
        w = (tt - self.times[k]) / (self.times[k + 1] - self.times[k])
        a = self._eval_slab(self.splines[k], X, order)
        b = self._eval_slab(self.splines[k + 1], X, order)
        return (1 - w) * a + w * b


def tabulated_operator(obj: dict) -> OperatorSpec:
    """Operator interpolated from tables of ``Q``, ``b`` and ``c`` on a tensor grid."""
    N = int(obj["N"])
    T = float(obj["T"])
    axes = obj["axes"]
    if len(axes) != N:
        raise ValueError("need one axis per dimension")
    times = obj.get("times")
    order = int(obj.get("spline_order", 5))
    tq = _Table(axes, times, obj["Q"], (N, N), order)
    tb = _Table(axes, times, obj["b"], (N,), order)
    tc = _Table(axes, times, obj["c"], (), order)
    cvals = np.asarray(obj["c"], dtype=float)
    qvals = np.asarray(obj["Q"], dtype=float).reshape(-1, N, N)
    nu0 = float(np.linalg.eigvalsh(0.5 * (qvals + np.swapaxes(qvals, -1, -2))).min())
    return OperatorSpec(
        dim=N, horizon=T,
        diffusion=lambda t, X: tq(t, X), drift=lambda t, X: tb(t, X),
        potential=lambda t, X: tc(t, X),
        diffusion_jet=lambda t, X, k: tq(t, X, k), drift_jet=lambda t, X, k: tb(t, X, k),
        potential_jet=lambda t, X, k: tc(t, X, k),
        nu0=nu0 if nu0 > 0 else None, c0=float(cvals.max()),
        time_independent=times is None or len(times) == 1,
        piecewise_in_time=times is None or len(times) == 1, name=obj.get("name", "tabulated"),
        description=dict(obj))


def operator_from_json(obj) -> OperatorSpec:
    """Build an operator from its JSON description (dict, JSON text or path)."""
    if isinstance(obj, str) and not obj.lstrip().startswith("{"):
        with open(obj) as fh:
            obj = json.load(fh)
    elif isinstance(obj, str):
        obj = json.loads(obj)
    family = obj.get("family")
    if family == "poly_example":
        return build_poly_example(PolyExampleSpec.from_json(obj),
                                  validate=bool(obj.get("validate", True)))
    if family == "affine":
        return affine_operator(N=int(obj["N"]), T=float(obj["T"]), Q=obj.get("Q", 1.0),
                               Q_profile=obj.get("Q_profile", 1.0), B=obj.get("B", 0.0),
                               B_profile=obj.get("B_profile", 1.0),
                               b_offset=obj.get("b_offset", 0.0), c=obj.get("c", 0.0),
                               name=obj.get("name", "affine"))
    if family == "custom_tabulated":
        return tabulated_operator(obj)
    raise ValueError(f"unknown operator family {family!r}")


# ---------------------------------------------------------------------------
# evaluation helpers


def apply_operator(op: OperatorSpec, t: float, u: GridFunction, derivatives=None) -> GridFunction:
    """Apply the operator to ``u`` on its mesh.

    ``derivatives`` may map multi-indices such as ``(2,)`` or ``(1, 1)`` to
    arrays of nodal derivative values; missing entries are computed with the
    fourth-order stencils, which trims the margin accordingly.
    """
    if u.dim != op.dim:
        raise ValueError("grid function and operator dimensions differ")
    derivatives = dict(derivatives or {})
    X = u.coords
    Q = op.diffusion(t, X)
    b = op.drift(t, X)
    c = op.potential(t, X)
    margin = u.margin

    def get(mi):
        nonlocal margin
        if mi in derivatives:
            return np.asarray(derivatives[mi], dtype=float)
        g = derivative(u, mi)
        margin = max(margin, g.margin)
        return g.values

    out = c * u.values
    N = op.dim
    for i in range(N):
        for j in range(i, N):
            mi = tuple((1 if a == i else 0) + (1 if a == j else 0) for a in range(N))
            coeff = Q[..., i, i] if i == j else Q[..., i, j] + Q[..., j, i]
            out = out + coeff * get(mi)
        mi = tuple(1 if a == i else 0 for a in range(N))
        out = out + b[..., i] * get(mi)
    return GridFunction(out, u.radius, u.h, margin)


def dissipativity_bound(op: OperatorSpec, t: float, X) -> np.ndarray:
    """Pointwise-tight ``d(t,x) = max eigenvalue of the symmetric part of Db``."""
    J = op.coefficient_derivative("drift", t, X, 1)
    return np.linalg.eigvalsh(0.5 * (J + np.swapaxes(J, -1, -2)))[..., -1]


def drift_curvature_bound(op: OperatorSpec, t: float, X) -> np.ndarray:
    """Pointwise ``r(t,x) = max |D^beta b_j|`` over ``|beta| = 2, 3``."""
    X = np.asarray(X, dtype=float)
    nb = X.ndim - 1
    out = np.zeros(X.shape[:-1])
    for k in (2, 3):
        D = op.coefficient_derivative("drift", t, X, k)
        out = np.maximum(out, np.abs(D).reshape(D.shape[:nb] + (-1,)).max(-1))
    return out


def potential_derivative_bound(op: OperatorSpec, t: float, X, floor: float = RHO_FLOOR):
    """Pointwise ``rho(t,x) = max(floor, max |D^gamma c|)`` over ``1 <= |gamma| <= 3``."""
    X = np.asarray(X, dtype=float)
    nb = X.ndim - 1
    out = np.full(X.shape[:-1], floor)
    for k in (1, 2, 3):
        D = op.coefficient_derivative("potential", t, X, k)
        out = np.maximum(out, np.abs(D).reshape(D.shape[:nb] + (-1,)).max(-1))
    return out


def ellipticity(op: OperatorSpec, t: float, X) -> np.ndarray:
    Q = op.diffusion(t, X)
    return np.linalg.eigvalsh(0.5 * (Q + np.swapaxes(Q, -1, -2)))[..., 0]


# ---------------------------------------------------------------------------
# hypothesis report


@dataclass
class ConditionRecord:
    """Verdict for one condition.  ``margin`` is set on pass, ``witness`` on fail."""

    id: str
    verdict: str
    constants: dict = field(default_factory=dict)
    margin: Optional[float] = None
    witness: Optional[dict] = None
    detail: str = ""


@dataclass
class HypothesisReport:
    conditions: list
    sampling: dict

    @property
    def passed(self) -> bool:
        return all(c.verdict == "pass" for c in self.conditions)

    @property
    def constants(self) -> dict:
        out = {}
        for c in self.conditions:
            out.update(c.constants)
        return out

    @property
    def fitted_constants(self) -> dict:
        """Constants asserted to exist, without the raw fits and the informational sampled maxima."""
        out = {}
        for c in self.conditions:
            if c.id == "dissipativity":
                continue
            out.update({k: v for k, v in c.constants.items()
                        if not k.endswith(("_fit_R", "_fit_2R"))})
        return out

    def __getitem__(self, key) -> ConditionRecord:
        for c in self.conditions:
            if c.id == key:
                return c
        raise KeyError(key)

    def failures(self):
        return [c for c in self.conditions if c.verdict != "pass"]

    def witness_points(self):
        """``(t, x)`` pairs of all recorded witnesses, for re-checking with more samples."""
        pts = []
        for c in self.conditions:
            if c.witness and "x" in c.witness:
                pts.append((c.witness["t"], tuple(c.witness["x"])))
        return pts

    def to_json(self) -> dict:
        return {"passed": self.passed, "sampling": self.sampling,
                "constants": self.constants,
                "conditions": [{"id": c.id, "verdict": c.verdict, "constants": c.constants,
                                "margin": c.margin, "witness": c.witness, "detail": c.detail}
                               for c in self.conditions]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["condition", "verdict", "margin", "witness_t", "witness_x", "witness_value",
                    "constants"])
        for c in self.conditions:
            wt = wx = wv = ""
            if c.witness:
                wt = c.witness.get("t", "")
                wx = " ".join(f"{v:.6g}" for v in c.witness.get("x", []))
                wv = c.witness.get("value", "")
            w.writerow([c.id, c.verdict, "" if c.margin is None else f"{c.margin:.6g}", wt, wx, wv,
                        json.dumps(c.constants, sort_keys=True)])
        return buf.getvalue()


def _sample_times(op: OperatorSpec, nt: int) -> np.ndarray:
    ts = set(np.linspace(0.0, op.horizon, nt).tolist())
    edges = [0.0] + [j for j in op.jump_times if 0 < j < op.horizon] + [op.horizon]
    for a, b in zip(edges[:-1], edges[1:]):
        ts.add(0.5 * (a + b))
    return np.array(sorted(ts))


def _sample_points(N: int, R: float, nx: int, extra=()):
    def grid(rad):
        ax = np.linspace(-rad, rad, nx)
        pts = np.stack(np.meshgrid(*([ax] * N), indexing="ij"), -1).reshape(-1, N)
        return pts[np.sqrt((pts**2).sum(-1)) <= rad * (1 + 1e-12)]

    pts = np.concatenate([grid(R), grid(2 * R)] + [np.asarray(extra, dtype=float).reshape(-1, N)])
    pts = np.unique(np.round(pts, 12), axis=0)
    return pts


class _Sampler:
    """Ratio fields on ``times x points`` with a flag for the inner box."""

    def __init__(self, op, R, nt, nx, extra):
        self.op = op
        self.R = R
        extra_x = [x for _, x in extra]
        self.times = _sample_times(op, nt)
        extra_t = [t for t, _ in extra if 0 <= t <= op.horizon]
        if extra_t:
            self.times = np.unique(np.concatenate([self.times, extra_t]))
        self.points = _sample_points(op.dim, R, nx, extra_x)
        self.inner = np.sqrt((self.points**2).sum(-1)) <= R * (1 + 1e-12)

    def field(self, fn) -> np.ndarray:
        return np.stack([np.asarray(fn(t, self.points), dtype=float) for t in self.times])

    def witness(self, vals, flat_idx, **extra) -> dict:
        i, j = np.unravel_index(flat_idx, vals.shape)
        w = {"t": float(self.times[i]), "x": [float(v) for v in self.points[j]],
             "value": float(vals[i, j])}
        w.update(extra)
        return w

    def bounded_sup(self, cid, vals, const_name, detail="", inflate=True) -> ConditionRecord:
        """Pass when the maximum over the doubled box exceeds the inner one by < 5%."""
        inner = vals[:, self.inner]
        m1 = float(inner.max())
        m2 = float(vals.max())
        allowed = m1 + GROWTH_TOL * abs(m1) + 1e-9
        fitted = max(m2, 0.0)
        const = fitted * INFLATION if inflate else fitted
        const = max(const, CONST_FLOOR)
        consts = {const_name: const, const_name + "_fit_R": m1, const_name + "_fit_2R": m2}
        if not np.isfinite(m2):
            bad = int(np.argmax(~np.isfinite(vals.ravel())))
            return ConditionRecord(cid, "fail", consts, witness=self.witness(vals, bad),
                                   detail=detail + " (non-finite ratio)")
        if m2 <= allowed:
            return ConditionRecord(cid, "pass", consts, margin=allowed - m2, detail=detail)
        wit = self.witness(vals, int(np.argmax(vals)), bound=allowed)
        return ConditionRecord(cid, "fail", consts, witness=wit,
                               detail=detail + f" (max grows from {m1:.4g} to {m2:.4g} on doubling)")


def _max_abs_tensor(D, nb):
    return np.abs(D).reshape(D.shape[:nb] + (-1,)).max(-1)


def _quadratic_form_bound(D2Q) -> np.ndarray:
    """Largest value of ``sum D_lm q_hk xi_hk xi_lm`` over unit symmetric ``xi``.

    ``D2Q`` has shape ``S + (N, N, N, N)`` indexed ``[h, k, l, m]``.
    """
    N = D2Q.shape[-1]
    basis = []
    for h in range(N):
        for k in range(h, N):
            E = np.zeros((N, N))
            if h == k:
                E[h, h] = 1.0
            else:
                E[h, k] = E[k, h] = 1.0 / np.sqrt(2.0)
            basis.append(E)
    B = np.stack(basis)
    G = np.einsum("ahk,...hklm,blm->...ab", B, D2Q, B)
    G = 0.5 * (G + np.swapaxes(G, -1, -2))
    return np.linalg.eigvalsh(G)[..., -1]


def poly_degree_analysis(spec: PolyExampleSpec) -> dict:
    """Compare leading powers of ``|x|`` in the asymptotic conditions.

    Returns a mapping condition -> ``(verdict, detail)`` where verdict is
    ``"pass"``, ``"fail"`` or ``"indeterminate"`` (same degree; sampling decides).
    """
    p, q, r = spec.p, spec.q, spec.r
    out = {}
    out["poly_exponents"] = ("pass" if p <= q else "fail", f"p={p}, q={q}")
    deg_r = 2 * q - 1 if q >= 1 else -np.inf
    deg_rho2 = 4 * r - 2 if r >= 1 else 0
    pos = max(deg_r, deg_rho2, 0)
    neg_or_rhs = max(2 * q, 2 * p)
    out["compatibility"] = ("pass" if pos <= neg_or_rhs else "fail",
                            f"positive-term degree {pos} vs absorbing degree {neg_or_rhs}")
    pos_m = 4 * r
    out["poly_compatibility"] = ("pass" if pos_m <= max(2 * q, 2 * p) else "fail",
                                 f"degree of kappa2^2 (1+|x|^2)^(2r) is {pos_m}, absorbing degree "
                                 f"{max(2 * q, 2 * p)}")
    neg = max(2 * q + 2, 2 * r + 2)
    if 2 * p > neg:
        v = "fail"
    elif 2 * p == neg:
        v = "indeterminate"
    else:
        v = "pass"
    out["lyapunov"] = (v, f"trace degree {2 * p} vs dissipative degree {neg}")
    return out


def check_hypotheses(op: OperatorSpec, box_radius: float = 8.0, samples=(9, 33),
                     extra_points=()) -> HypothesisReport:
    """Sample the hypotheses on boxes of radius ``box_radius`` and ``2*box_radius``.

    ``samples`` is ``(time samples, space samples per axis)`` with at least 8
    points per axis.  ``extra_points`` is a list of ``(t, x)`` pairs always
    included (for instance earlier witnesses).
    """
    nt, nx = (samples, samples) if np.isscalar(samples) else samples
    if nx < 8 or nt < 2:
        raise ValueError("need at least 8 spatial and 2 temporal samples")
    S = _Sampler(op, float(box_radius), int(nt), int(nx), list(extra_points))
    pts = S.points
    N = op.dim
    w1 = 1.0 + (pts**2).sum(-1)
    recs = []

    Q = np.stack([op.diffusion(t, pts) for t in S.times])
    asym = np.abs(Q - np.swapaxes(Q, -1, -2)).max(axis=(-1, -2)) / (1 + np.abs(Q).max(axis=(-1, -2)))
    if asym.max() <= 1e-12:
        recs.append(ConditionRecord("symmetry", "pass", margin=float(1e-12 - asym.max())))
    else:
        recs.append(ConditionRecord("symmetry", "fail", witness=S.witness(asym, int(asym.argmax()))))

    nu = np.linalg.eigvalsh(0.5 * (Q + np.swapaxes(Q, -1, -2)))[..., 0]
    nu_min = float(nu.min())
    nu_inner = float(nu[:, S.inner].min())
    cons = {"nu0": nu_min}
    if nu_min <= 0 or (op.nu0 is not None and nu_min < op.nu0 * (1 - 1e-12)):
        recs.append(ConditionRecord("ellipticity", "fail", cons,
                                    witness=S.witness(-nu, int(nu.argmin()), nu=nu_min,
                                                      declared=op.nu0)))
    elif op.nu0 is None and nu_min < 0.95 * nu_inner:
        recs.append(ConditionRecord("ellipticity", "fail", cons,
                                    witness=S.witness(nu, int(nu.argmin())),
                                    detail="ellipticity degenerates as the box grows"))
    else:
        floor = op.nu0 if op.nu0 is not None else 0.95 * nu_inner
        recs.append(ConditionRecord("ellipticity", "pass", cons, margin=nu_min - floor))
    nu_safe = np.maximum(nu, 1e-300)

    Qx = np.linalg.norm(np.einsum("...ij,...j->...i", Q, pts[None]), axis=-1)
    recs.append(S.bounded_sup("growth_Qx", Qx / (w1 * nu_safe), "C1"))
    tr = np.trace(Q, axis1=-2, axis2=-1)
    recs.append(S.bounded_sup("growth_trace", tr / (w1 * nu_safe), "C2"))
    b = S.field(op.drift)
    bx = (b * pts[None]).sum(-1)
    recs.append(S.bounded_sup("growth_drift", bx / (w1 * nu_safe), "C3"))

    c = S.field(op.potential)
    cmax = float(c.max())
    if op.c0 is not None:
        tol = 1e-12 * (1 + abs(op.c0))
        if cmax <= op.c0 + tol:
            recs.append(ConditionRecord("potential_bound", "pass", {"c0": op.c0},
                                        margin=op.c0 + tol - cmax))
        else:
            recs.append(ConditionRecord("potential_bound", "fail", {"c0": op.c0},
                                        witness=S.witness(c, int(c.argmax()), bound=op.c0)))
    else:
        rec = S.bounded_sup("potential_bound", c, "c0", inflate=False)
        rec.constants["c0"] = cmax
        recs.append(rec)

    nb = 2  # batch axes: (time, point)
    for k, name in ((1, "K1"), (2, "K2"), (3, "K3")):
        D = S.field(lambda t, X: op.coefficient_derivative("diffusion", t, X, k))
        rec = S.bounded_sup(f"diffusion_d{k}", _max_abs_tensor(D, nb) / nu_safe, name)
        noise = op.fd_noise(k, float(np.abs(Q).max()))
        if noise and rec.margin is not None and rec.margin < noise:
            rec.verdict = "indeterminate"
            rec.detail = "finite-difference noise exceeds the margin"
        recs.append(rec)
        if k == 2:
            form = _quadratic_form_bound(D) / nu_safe
            recs.append(S.bounded_sup("diffusion_d2_form", form, "K2_form"))

    d = S.field(lambda t, X: dissipativity_bound(op, t, X))
    r = S.field(lambda t, X: drift_curvature_bound(op, t, X))
    rho = S.field(lambda t, X: potential_derivative_bound(op, t, X))
    recs.append(ConditionRecord("dissipativity", "pass",
                                {"d_max": float(d.max()), "r_max": float(r.max()),
                                 "rho_max": float(rho.max())}, margin=0.0,
                                detail="pointwise-tight evaluators d, r, rho"))

    degrees = poly_degree_analysis(op.poly) if op.poly is not None else {}
    recs.append(_compatibility(S, "compatibility", d, r, rho**2, nu, degrees.get("compatibility")))

    lyap = S.field(op.apply_to_lyapunov)
    phi = op.lyapunov_jet(pts)[0]
    rec = S.bounded_sup("lyapunov", lyap - op.lyapunov_lambda * phi[None], "lyapunov_sup",
                        inflate=False)
    rec.constants["lyapunov_sup"] = rec.constants["lyapunov_sup_fit_2R"]
    rec.constants["lambda"] = op.lyapunov_lambda
    _apply_degree(rec, degrees.get("lyapunov"))
    recs.append(rec)

    if op.poly is not None:
        spec = op.poly
        v, det = degrees["poly_exponents"]
        if v == "pass":
            recs.append(ConditionRecord("poly_exponents", "pass", {"p": spec.p, "q": spec.q},
                                        margin=float(spec.q - spec.p), detail=det))
        else:
            recs.append(ConditionRecord("poly_exponents", "fail", {"p": spec.p, "q": spec.q},
                                        witness={"p": spec.p, "q": spec.q}, detail=det))
        recs.extend(_poly_majorant(S, op, spec, degrees))

    sampling = {"box_radius": float(box_radius), "doubled_radius": 2.0 * box_radius,
                "time_samples": int(len(S.times)), "space_samples_per_axis": int(nx),
                "points": int(len(pts)), "analytic_derivatives": op.analytic_derivatives}
    return HypothesisReport(recs, sampling)


def _apply_degree(rec: ConditionRecord, deg):
    if deg is None:
        return
    verdict, det = deg
    rec.detail = (rec.detail + "; " if rec.detail else "") + "exponents: " + det
    if verdict == "fail" and rec.verdict == "pass":
        rec.verdict = "fail"
        rec.witness = {"degree_analysis": det}
        rec.margin = None


def _compatibility(S, cid, d, r, rho2, nu, degree=None, extra_const=None):
    """Search L1, L2 on a ladder; L3 is the fitted ratio (d + L1 r + L2 rho^2)/nu."""
    nu_safe = np.maximum(nu, 1e-300)
    best = None
    for L1 in L_LADDER:
        for L2 in L_LADDER:
            ratio = (d + L1 * r + L2 * rho2) / nu_safe
            m1 = float(ratio[:, S.inner].max())
            m2 = float(ratio.max())
            if m2 <= m1 + GROWTH_TOL * abs(m1) + 1e-9:
                L3 = max(m2 * INFLATION, CONST_FLOOR)
                key = (-L1 * L2, L3)
                if best is None or key < best[0]:
                    best = (key, L1, L2, L3, m1 + GROWTH_TOL * abs(m1) + 1e-9 - m2)
    if best is None:
        L1 = L2 = L_LADDER[-1]
        ratio = (d + L1 * r + L2 * rho2) / nu_safe
        rec = ConditionRecord(cid, "fail", {"L1": L1, "L2": L2},
                              witness=S.witness(ratio, int(ratio.argmax())),
                              detail="no (L1, L2) on the ladder gives a bounded L3")
    else:
        _, L1, L2, L3, margin = best
        rec = ConditionRecord(cid, "pass", {"L1": L1, "L2": L2, "L3": L3}, margin=margin)
    _apply_degree(rec, degree)
    return rec


def _poly_majorant(S, op, spec, degrees):
    """Constants kappa1..3 and the majorant form of the compatibility inequality."""
    pts = S.points
    w = 1.0 + (pts**2).sum(-1)
    r = S.field(lambda t, X: drift_curvature_bound(op, t, X))
    kap1 = float((r / w[None] ** spec.q).max())
    rho = S.field(lambda t, X: potential_derivative_bound(op, t, X))
    kap2 = float((rho / w[None] ** spec.r).max())
    kap3 = _poly_kappa3(spec)
    b0 = spec.b0.sup()
    nu0 = spec.nu0
    lhs_b = b0 * w ** spec.q
    lhs_1 = kap1 * w ** spec.q
    lhs_2 = kap2**2 * w ** (2 * spec.r)
    rhs = nu0 * w ** spec.p
    shape = (1, len(pts))
    rec = _compatibility(S, "poly_compatibility", lhs_b.reshape(shape), lhs_1.reshape(shape),
                         lhs_2.reshape(shape) / 1.0, rhs.reshape(shape),
                         degrees.get("poly_compatibility"))
    rec.constants.update({"kappa1": kap1, "kappa2": kap2, "kappa3": kap3})
    return [rec]


def lyapunov_sup(op: OperatorSpec, radius: float, nx: int = 65, nt: int = 9) -> float:
    """``sup (A phi - lambda phi)`` over sampled ``(t, x)`` with ``|x| <= radius``."""
    ax = np.linspace(-radius, radius, nx)
    pts = np.stack(np.meshgrid(*([ax] * op.dim), indexing="ij"), -1).reshape(-1, op.dim)
    pts = pts[np.sqrt((pts**2).sum(-1)) <= radius * (1 + 1e-12)]
    phi = op.lyapunov_jet(pts)[0]
    vals = [op.apply_to_lyapunov(t, pts) - op.lyapunov_lambda * phi
            for t in _sample_times(op, nt)]
    return float(np.max(vals))
