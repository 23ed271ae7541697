"""Gaussian time-mollification of measurable-in-time coefficients.

For ``n >= 1`` a bounded function ``h`` on ``[0, T]`` is replaced by

    h_n(t) = (n / 4 pi)^(1/2) int_0^T h(tau) exp(-n (t - tau)^2 / 4) dtau.

The kernel loses mass near the ends of ``[0, T]``; its mass never drops
below ``erf(T/4)/2``, which is the factor in the uniform ellipticity floor
of the mollified diffusion.  Piecewise-constant profiles are integrated
exactly through ``erf``; other profiles use composite Gauss-Legendre panels
no wider than ``(4/n)^(1/2) / 10``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from math import erf, sqrt
from typing import Callable, Optional

import numpy as np
from scipy.special import erf as verf

from .fields import TimeProfile, kernel_floor, truncated_gaussian_mass
from .holder_norms import derivative, multi_indices
from .inhomogeneous import ForcedProblem, integral_identity_residual, solve_forced
from .operator_model import (OperatorSpec, check_hypotheses, dissipativity_bound,
                             drift_curvature_bound, ellipticity, potential_derivative_bound)
from .truncated_solver import Trajectory

DEFAULT_N_LADDER = (4, 16, 64, 256)
CONVERGENCE_COLUMNS = ("n", "increment_sup", "increment_grad", "increment_hess", "residual")
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def nu_floor(nu0: float, T: float) -> float:
    """Uniform lower bound of the mollified ellipticity, ``nu0 * erf(T/4) / 2``."""
    return nu0 * kernel_floor(T)


def hat_c0(c0: float, T: float) -> float:
    """Upper bound of the mollified potential given ``c <= c0``."""
    return c0 if c0 >= 0 else c0 * kernel_floor(T)


def piece_weights(pieces, n: float, t) -> np.ndarray:
    """Kernel mass of each piece ``(a, b, .)`` seen from times ``t``; shape ``t.shape + (pieces,)``."""
    t = np.asarray(t, dtype=float)
    rn = sqrt(n) / 2.0
    a = np.array([p[0] for p in pieces])
    b = np.array([p[1] for p in pieces])
    return 0.5 * (verf(rn * (b - t[..., None])) - verf(rn * (a - t[..., None])))


def quadrature_rule(n: float, t: float, T: float, width: float = 8.0):
    """Nodes and weights for ``h -> h_n(t)`` with Gauss-Legendre panels.

    The window is ``t +- width`` kernel standard deviations clipped to
    ``[0, T]``; panels are at most ``(4/n)^(1/2)/10`` wide.
    """
    sd = sqrt(2.0 / n)
    lo, hi = max(0.0, t - width * sd), min(T, t + width * sd)
    if hi <= lo:
        return np.zeros(0), np.zeros(0)
    step = sqrt(4.0 / n) / 10.0
    m = max(1, int(np.ceil((hi - lo) / step)))
    edges = np.linspace(lo, hi, m + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_X[None]).ravel()
    w = (half[:, None] * _GL_W[None]).ravel()
    kern = sqrt(n / (4 * np.pi)) * np.exp(-n * (t - nodes) ** 2 / 4.0)
    return nodes, w * kern


def gaussian_mollify(h, n: float, t, T: float):
    """``h_n(t)`` for a :class:`TimeProfile` or a vectorized callable of time."""
    if n < 1:
        raise ValueError("n must be at least 1")
    t_arr = np.asarray(t, dtype=float)
    pieces = h.pieces(T) if isinstance(h, TimeProfile) else None
    if pieces is not None:
        w = piece_weights(pieces, n, t_arr)
        out = w @ np.array([p[2] for p in pieces])
    else:
        fn = h if callable(h) else None
        out = np.empty(t_arr.shape)
        for idx in np.ndindex(*t_arr.shape):
            nodes, w = quadrature_rule(n, float(t_arr[idx]), T)
            out[idx] = float(np.dot(w, np.asarray(fn(nodes), dtype=float))) if len(nodes) else 0.0
    return out if t_arr.shape else float(out)


def square_profile(p: TimeProfile) -> TimeProfile:
    """Pointwise square of a piecewise-constant profile."""
    if p.kind == "piecewise_constant":
        return TimeProfile("piecewise_constant", jumps=p.jumps, values=tuple(v * v for v in p.values))
    if p.kind == "constant":
        return TimeProfile("constant", value=p.value**2)
    raise ValueError("square_profile expects a piecewise-constant profile")


class _TimeRule:
    """Weights turning samples of a time-dependent field into its mollification."""

    def __init__(self, op: OperatorSpec, n: float, extra_jumps=()):
        self.n, self.T = float(n), op.horizon
        if op.piecewise_in_time:
            edges = sorted({0.0, self.T} | {j for j in tuple(op.jump_times) + tuple(extra_jumps)
                                           if 0 < j < self.T})
            self.pieces = [(a, b, 0.5 * (a + b)) for a, b in zip(edges[:-1], edges[1:])]
        else:
            self.pieces = None

    def __call__(self, t: float):
        if self.pieces is not None:
            w = piece_weights(self.pieces, self.n, np.array(t))
            return np.array([p[2] for p in self.pieces]), np.asarray(w)
        return quadrature_rule(self.n, float(t), self.T)

    def apply(self, fn, t, *args):
        nodes, w = self(t)
        acc = None
        for tq, wq in zip(nodes, w):
            if wq == 0.0:
                continue
            val = wq * np.asarray(fn(float(tq), *args), dtype=float)
            acc = val if acc is None else acc + val
        if acc is None:
            return 0.0 * np.asarray(fn(0.0, *args), dtype=float)
        return acc


def mollify_operator(op: OperatorSpec, n: float) -> OperatorSpec:
    """Operator whose coefficients (and their spatial derivatives) are mollified in time."""
    rule = _TimeRule(op, n)
    T = op.horizon

    def wrap(fn):
        return lambda t, X: rule.apply(fn, t, X)

    def wrap_jet(which):
        if getattr(op, which + "_jet") is None:
            return None
        return lambda t, X, k: rule.apply(
            lambda tq, Y: op.coefficient_derivative(which, tq, Y, k), t, X)

    desc = None if op.description is None else {"mollified": float(n), "base": op.description}
    return replace(
        op, diffusion=wrap(op.diffusion), drift=wrap(op.drift), potential=wrap(op.potential),
        diffusion_jet=wrap_jet("diffusion"), drift_jet=wrap_jet("drift"),
        potential_jet=wrap_jet("potential"),
        nu0=None if op.nu0 is None else nu_floor(op.nu0, T),
        c0=None if op.c0 is None else hat_c0(op.c0, T),
        jump_times=(), time_independent=False, piecewise_in_time=False,
        name=f"{op.name}_n{n:g}", description=desc, poly=None)


def mollified_evaluators(op: OperatorSpec, n: float, t: float, X) -> dict:
    """Mollified ``nu, d, r, rho, rho^2`` and the mollified-coefficient ellipticity at ``(t, X)``."""
    rule = _TimeRule(op, n)
    out = {
        "nu": rule.apply(lambda tq, Y: ellipticity(op, tq, Y), t, X),
        "d": rule.apply(lambda tq, Y: dissipativity_bound(op, tq, Y), t, X),
        "r": rule.apply(lambda tq, Y: drift_curvature_bound(op, tq, Y), t, X),
        "rho": rule.apply(lambda tq, Y: potential_derivative_bound(op, tq, Y), t, X),
        "rho2": rule.apply(lambda tq, Y: potential_derivative_bound(op, tq, Y) ** 2, t, X),
    }
    return out


@dataclass
class PreservationReport:
    """Outcome of checking the hypotheses for the mollified family."""

    base_constants: dict
    per_n: dict
    compatibility_violation: float
    jensen_violation: float
    floor_violation: float
    constant_growth: dict
    passed: bool
    tolerance: float = 1e-10
    details: list = field(default_factory=list)


#: Constants that may not exceed their unmollified values.
_MONOTONE_CONSTANTS = ("C1_fit_2R", "C2_fit_2R", "K1_fit_2R", "K2_fit_2R", "K3_fit_2R",
                       "K2_form_fit_2R", "C3_fit_2R")


def hypothesis_preservation_check(op: OperatorSpec, n_values=DEFAULT_N_LADDER,
                                  box_radius: float = 8.0, samples=(9, 17),
                                  tolerance: float = 1e-10) -> PreservationReport:
    """Check that mollification preserves the hypotheses with ``n``-independent constants.

    The compatibility constants ``L1, L2, L3`` fitted on the original
    coefficients are reused in
    ``d_n + L1 r_n + L2 (rho^2)_n <= L3 nu_n`` at all sample points; Jensen's
    inequality ``(rho_n)^2 <= (rho^2)_n`` and the floor
    ``nu_n >= nu0 erf(T/4)/2`` are checked at the same points, and the
    checker is rerun on every mollified operator.
    """
    base = check_hypotheses(op, box_radius, samples)
    bc = base.constants
    L1, L2, L3 = bc.get("L1"), bc.get("L2"), bc.get("L3")
    nt, nx = samples
    ts = np.linspace(0.0, op.horizon, nt)
    ax = np.linspace(-box_radius, box_radius, nx)
    X = np.stack(np.meshgrid(*([ax] * op.dim), indexing="ij"), -1).reshape(-1, op.dim)
    X = X[np.sqrt((X**2).sum(-1)) <= box_radius * (1 + 1e-12)]
    floor = nu_floor(op.nu0, op.horizon) if op.nu0 is not None else 0.0
    compat = jensen = floor_v = 0.0
    per_n, growth, details = {}, {}, []
    for n in n_values:
        for t in ts:
            ev = mollified_evaluators(op, n, t, X)
            scale = 1.0 + np.abs(ev["d"]) + np.abs(ev["r"]) + ev["rho2"] + np.abs(ev["nu"])
            if L1 is not None:
                lhs = ev["d"] + L1 * ev["r"] + L2 * ev["rho2"] - L3 * ev["nu"]
                compat = max(compat, float((lhs / scale).max()))
            jensen = max(jensen, float((ev["rho"] ** 2 - ev["rho2"]).max()))
            floor_v = max(floor_v, float((floor - ev["nu"]).max()))
        rep = check_hypotheses(mollify_operator(op, n), box_radius, samples)
        per_n[n] = rep
        for key in _MONOTONE_CONSTANTS:
            if key in bc and key in rep.constants:
                g = rep.constants[key] - max(bc[key], 0.0)
                growth[key] = max(growth.get(key, -np.inf), g)
        if not rep.passed:
            details.append(f"n={n}: " + ", ".join(c.id for c in rep.failures()))
    ok = (base.passed and compat <= tolerance and jensen <= tolerance
          and floor_v <= 1e-8 and all(g <= 1e-9 for g in growth.values()) and not details)
    return PreservationReport(bc, per_n, compat, jensen, floor_v, growth, ok, tolerance, details)


# ---------------------------------------------------------------------------
# discontinuous-in-time problems


@dataclass
class DiscontinuousResult:
    """Members of the mollified family with their successive increments."""

    n_values: list
    trajectories: list
    rows: list
    converged: bool
    tol: float

    @property
    def final(self) -> Trajectory:
        return self.trajectories[-1]

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CONVERGENCE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (f"{r[k]:.10g}" if isinstance(r[k], float) else r[k])
                        for k in CONVERGENCE_COLUMNS})
        return buf.getvalue()


def mollify_source(g: Callable, op: OperatorSpec, n: float, jumps=()) -> Callable:
    rule = _TimeRule(op, n, jumps)
    return lambda t, X: rule.apply(g, t, X)


def _increments(a: Trajectory, b: Trajectory, R: float):
    fa, fb = a.frames, b.frames
    diff = fa - fb
    mask = a.frame(0).region(R)
    inc = float(np.abs(diff[:, mask]).max())
    grad = hess = 0.0
    for k in range(len(a)):
        d = a.frame(k).with_values(diff[k])
        for mi in multi_indices(a.dim, 1):
            grad = max(grad, float(np.abs(derivative(d, mi).values[mask]).max()))
        for mi in multi_indices(a.dim, 2):
            hess = max(hess, float(np.abs(derivative(d, mi).values[mask]).max()))
    return inc, grad, hess


def solve_discontinuous(op: OperatorSpec, f: Callable, g: Optional[Callable] = None,
                        n_values=DEFAULT_N_LADDER, tol: float = 5e-2, h: float = 1.0 / 32,
                        tau: float = 1e-3, radii=(8.0, 16.0), R_eval: float = 1.0,
                        scheme="backward_euler", g_jumps=(), ladder_tol: float = 1e-4,
                        store_every: int = 1) -> DiscontinuousResult:
    """Solve every mollified member and record successive increments on ``B(0, R_eval)``.

    Each row holds the sup-norm, gradient and Hessian increments against the
    previous member and the integral-identity residual of the member against
    its own (mollified) operator.  ``converged`` requires all three
    increments of the last pair below ``tol``.
    """
    n_values = list(n_values)
    if any(b <= a for a, b in zip(n_values, n_values[1:])) or n_values[0] < 1:
        raise ValueError("n ladder must be increasing and start at n >= 1")
    trajs, rows = [], []
    for n in n_values:
        op_n = mollify_operator(op, n)
        g_n = None if g is None else mollify_source(g, op, n, g_jumps)
        p = ForcedProblem(op_n, f, g_n, h=h, tau=tau, radii=tuple(radii), tol=ladder_tol,
                          R_eval=R_eval, scheme=scheme)
        tr = solve_forced(p, store_every=store_every)
        res = integral_identity_residual(tr, op_n, g_n, R_eval)
        row = {"n": n, "increment_sup": float("nan"), "increment_grad": float("nan"),
               "increment_hess": float("nan"), "residual": res}
        if trajs:
            inc = _increments(tr, trajs[-1], R_eval)
            row.update(increment_sup=inc[0], increment_grad=inc[1], increment_hess=inc[2])
        trajs.append(tr)
        rows.append(row)
    last = rows[-1]
    converged = len(rows) > 1 and max(last["increment_sup"], last["increment_grad"],
                                      last["increment_hess"]) < tol
    return DiscontinuousResult(n_values, trajs, rows, converged, tol)
