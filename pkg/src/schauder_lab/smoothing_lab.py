"""Measured smoothing rates and the Bernstein-type functional.

``measure_smoothing`` solves from a datum of limited regularity and fits
``log ||u(t)||_{C^beta}`` against ``log (t - s)`` on a ladder of times; the
fitted exponent is compared with ``(beta - alpha)/2``.

``bernstein_monitor`` tracks
``v = u^2 + a t eta^2 |Du|^2 + a^2 t^2 eta^4 |D^2u|^2 + a^3 t^3 eta^6 |D^3u|^2``
on a single ball with datum ``eta f`` and compares its sup with
``exp(c1 t) ||eta f||_inf^2``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from math import factorial, floor
from typing import Callable, Optional

import numpy as np

from .fields import Jet, smoothstep, smoothstep_derivatives
from .holder_norms import GridFunction, ck_alpha_norm, derivative, multi_indices, sup_norm
from .operator_model import OperatorSpec
from .truncated_solver import DEFAULT_LADDER, expanding_ball_solve, solve_dirichlet

SMOOTHING_COLUMNS = ("alpha", "beta", "t_minus_s", "norm", "fitted_exponent", "fitted_C",
                     "residual")


class UnderResolvedError(RuntimeError):
    """Norms on the mesh and on its 2h subsample disagree by more than the threshold."""


@dataclass
class SmoothingFit:
    """Power-law fit ``||u(t)||_{C^beta} ~ C (t - s)^(-exponent)``."""

    alpha: float
    beta: float
    t_minus_s: np.ndarray
    norms: np.ndarray
    exponent: float
    constant: float
    residual: float
    resolution_gap: float = 0.0
    provenance: dict = field(default_factory=dict)

    @property
    def predicted(self) -> float:
        return (self.beta - self.alpha) / 2.0

    @property
    def deviation(self) -> float:
        return abs(self.exponent - self.predicted)

    def rows(self):
        return [{"alpha": self.alpha, "beta": self.beta, "t_minus_s": float(t), "norm": float(n),
                 "fitted_exponent": self.exponent, "fitted_C": self.constant,
                 "residual": self.residual}
                for t, n in zip(self.t_minus_s, self.norms)]


def smoothing_csv(fits) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SMOOTHING_COLUMNS, lineterminator="\n")
    w.writeheader()
    for fit in fits:
        for row in fit.rows():
            w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def fit_power_law(t, norms):
    """Least-squares line through ``(log t, log norm)``: returns exponent, constant, RMS residual."""
    lt, ln = np.log(np.asarray(t, dtype=float)), np.log(np.asarray(norms, dtype=float))
    slope, icpt = np.polyfit(lt, ln, 1)
    res = ln - (slope * lt + icpt)
    return float(-slope), float(np.exp(icpt)), float(np.sqrt(np.mean(res**2)))


def default_ladder(T: float, count: int = 8):
    return [T * 2.0 ** (-i) for i in range(1, count + 1)]


def _split(beta: float):
    k = int(floor(beta + 1e-12))
    return k, beta - k


def measure_smoothing(op: OperatorSpec, f: Callable, alpha: float, beta: float, h: float,
                      tau: float, ladder=None, s: float = 0.0, radii=DEFAULT_LADDER,
                      tol: float = 1e-4, R_eval: float = 1.0, scheme="backward_euler",
                      check_resolution: bool = True, resolution_tol: float = 0.10,
                      seed: int = 0) -> SmoothingFit:
    """Fit the decay rate of the ``C^beta`` norm for a datum of regularity ``alpha``.

    ``ladder`` lists values of ``t - s`` (default ``T 2^-i``, ``i = 1..8``).
    They are rounded to multiples of ``tau``; at least five points spanning
    1.5 decades with ``t - s >= 20 tau`` are required.  With
    ``check_resolution`` the norms are recomputed on the 2h subsample of the
    same solution and a relative gap above ``resolution_tol`` raises
    :class:`UnderResolvedError`.
    """
    if not 0 <= alpha < beta <= 3:
        raise ValueError("need 0 <= alpha < beta <= 3")
    ladder = default_ladder(op.horizon - s) if ladder is None else list(ladder)
    steps = sorted({int(round(t / tau)) for t in ladder})
    if steps[0] < 20:
        raise ValueError("smallest ladder time must be at least 20 time steps")
    if len(steps) < 5:
        raise ValueError("need at least 5 distinct ladder times")
    times = np.array(steps) * tau
    if np.log10(times[-1] / times[0]) < 1.5 - 1e-9:
        raise ValueError("ladder must span at least 1.5 decades")
    traj = expanding_ball_solve(op, f, h, tau, s=s, T=s + times[-1], radii=radii, tol=tol,
                                scheme=scheme, output_times=s + times, strict=False)
    k, a = _split(beta)
    norms, gaps = [], []
    for t in times:
        g = traj.at(s + t)
        val = ck_alpha_norm(g, k, a, R_eval, seed=seed).value
        norms.append(val)
        if check_resolution:
            coarse = ck_alpha_norm(g.coarsen(), k, a, R_eval, seed=seed).value
            gaps.append(abs(coarse - val) / max(abs(val), 1e-300))
    norms = np.array(norms)
    gap = float(max(gaps)) if gaps else 0.0
    if check_resolution and gap > resolution_tol:
        raise UnderResolvedError(
            f"C^{beta} norms differ by {gap:.1%} between h and 2h; refine the mesh")
    e, C, res = fit_power_law(times, norms)
    prov = {"h": h, "tau": tau, "R_eval": R_eval, "ladder": traj.provenance.get("ladder"),
            "scheme": traj.scheme}
    return SmoothingFit(alpha, beta, times, norms, e, C, res, gap, prov)


# ---------------------------------------------------------------------------
# Bernstein functional


def cutoff_eta(dim: int, radius: float, h: float, n: float) -> GridFunction:
    """``eta(x) = psi(|x|/n)`` on the mesh of ``B(0, radius)``.

    ``psi = 1`` on ``[0, 1/2]``, ``0`` on ``[1, inf)`` with a septic
    smoothstep in between, so ``eta`` has three continuous derivatives.
    """
    g = GridFunction(np.zeros((int(round(2 * radius / h)) + 1,) * dim), radius, h)
    rho = g.norms / n
    return g.with_values(1.0 - smoothstep(2.0 * rho - 1.0))


def cutoff_eta_jet(X, n: float) -> Jet:
    """Exact derivatives (orders 0..3) of the cutoff at points ``X``."""
    X = np.asarray(X, dtype=float)
    r = np.sqrt((X**2).sum(-1))
    z = 2.0 * r / n - 1.0
    d1, d2, d3 = smoothstep_derivatives(z)
    c = 2.0 / n
    p0 = 1.0 - smoothstep(z)
    p1, p2, p3 = -c * d1, -c**2 * d2, -c**3 * d3
    # radial jet of |x|, only needed where the profile varies (|x| > n/2 > 0)
    safe = np.where(r > 0, r, 1.0)
    N = X.shape[-1]
    eye = np.eye(N)
    u = X / safe[..., None]
    r1 = u
    r2 = (eye - np.einsum("...i,...j->...ij", u, u)) / safe[..., None, None]
    t3 = (np.einsum("ij,...k->...ijk", eye, u) + np.einsum("ik,...j->...ijk", eye, u)
          + np.einsum("jk,...i->...ijk", eye, u))
    r3 = (-t3 + 3 * np.einsum("...i,...j,...k->...ijk", u, u, u)) / safe[..., None, None, None] ** 2
    radial = Jet(r, r1, r2, r3)
    jet = radial.compose(p0, p1, p2, p3)
    flat = ~((z > 0) & (z < 1))
    jet.d1[flat] = 0.0
    jet.d2[flat] = 0.0
    jet.d3[flat] = 0.0
    return jet


def bernstein_c1(c0: float, T: float) -> float:
    return 2.0 * c0 + T * (1.0 + T + T**2)


def default_bernstein_a(nu0: float, T: float) -> float:
    return 0.01 * min(1.0, nu0) / (1.0 + T**3)


@dataclass
class BernsteinMonitor:
    times: np.ndarray
    sup_v: np.ndarray
    bound: np.ndarray
    a: float
    c1: float
    n: float
    derivative_noise: bool = False

    @property
    def ratios(self) -> np.ndarray:
        return self.sup_v / self.bound

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())


def _sq_derivs(g: GridFunction, order: int):
    tot = None
    margin = g.margin
    for m in multi_indices(g.dim, order):
        d = derivative(g, m)
        # mixed derivatives appear order!/prod(m_i!) times in |D^k u|^2
        mult = factorial(order) / float(np.prod([factorial(x) for x in m]))
        tot = mult * d.values**2 if tot is None else tot + mult * d.values**2
        margin = max(margin, d.margin)
    return tot, margin


def bernstein_functional(u: GridFunction, eta: GridFunction, a: float, t: float) -> GridFunction:
    """``v`` on the trimmed mesh of ``u`` at elapsed time ``t``."""
    e2 = eta.values**2
    v = u.values**2
    margin = u.margin
    if t > 0:
        for k in (1, 2, 3):
            sq, m = _sq_derivs(u, k)
            margin = max(margin, m)
            v = v + (a * t * e2) ** k * sq
    return GridFunction(v, u.radius, u.h, margin)


def bernstein_monitor(op: OperatorSpec, f: Callable, n: float, h: float, tau: float,
                      a: Optional[float] = None, s: float = 0.0, T: Optional[float] = None,
                      store_every: int = 1, check_noise: bool = False) -> BernsteinMonitor:
    """Sup of the Bernstein functional on ``B(0, n)`` against ``exp(c1 t) ||eta f||^2``.

    ``c1 = 2 c0 + T(1 + T + T^2)`` with ``T`` the horizon.  The default
    ``a`` is ``0.01 min(1, nu0)/(1 + T^3)``.  With ``check_noise`` the third
    derivatives are recomputed on the 2h subsample and a disagreement above
    10% sets ``derivative_noise``.
    """
    T = op.horizon if T is None else T
    if op.c0 is None or op.nu0 is None:
        raise ValueError("operator needs declared nu0 and c0")
    a = default_bernstein_a(op.nu0, T) if a is None else a
    if a < 0:
        raise ValueError("a must be nonnegative")
    c1 = bernstein_c1(op.c0, T)
    eta = cutoff_eta(op.dim, n, h, n)
    X = eta.coords
    datum = eta.values * np.asarray(f(X), dtype=float)
    traj = solve_dirichlet(op, datum, n, h, tau, s=s, T=T, store_every=store_every)
    fnorm2 = float(np.abs(datum).max()) ** 2
    sups, noisy = [], False
    for k, t in enumerate(traj.times):
        u = traj.frame(k)
        v = bernstein_functional(u, eta, a, t - s)
        sups.append(sup_norm(v, v.valid_radius) if t > s else float((u.values**2).max()))
        if check_noise and t > s:
            fine, _ = _sq_derivs(u, 3)
            coarse, mc = _sq_derivs(u.coarsen(), 3)
            fine_c = GridFunction(fine, u.radius, u.h, mc * 2).coarsen()
            R = u.radius - (mc + 1) * 2 * u.h
            m = fine_c.region(R)
            ref = np.sqrt(fine_c.values[m].max())
            if ref > 0 and abs(np.sqrt(coarse[m].max()) - ref) > 0.1 * ref:
                noisy = True
    bound = np.exp(c1 * (traj.times - s)) * fnorm2
    return BernsteinMonitor(traj.times, np.array(sups), bound, a, c1, n, noisy)
