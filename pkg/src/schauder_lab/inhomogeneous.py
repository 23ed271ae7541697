"""Forced problems, variation of constants and the Schauder ratio.

The forced problem ``u_t = A u + g``, ``u(s) = f`` is solved directly with
the theta-scheme and, independently, through the variation-of-constants
formula ``u(t) = G(t,s) f + int_s^t G(t,r) g(r) dr`` evaluated with the
trapezoid rule on homogeneous solves.  The Schauder ratio compares
``sup_t ||u(t)||_{C^{2+theta}}`` with ``||f||_{C^{2+theta}} + sup_t ||g(t)||_{C^theta}``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .holder_norms import GridFunction, ck_alpha_norm
from .operator_model import OperatorSpec, apply_operator
from .truncated_solver import (BallMesh, Trajectory, expanding_ball_solve, solve_dirichlet)

MAX_VOC_SOLVES = 256
SCHAUDER_COLUMNS = ("theta", "norm_f", "norm_g", "sup_norm_u_c2theta", "ratio", "h", "tau")


@dataclass
class ForcedProblem:
    """Data of a forced problem on ``[s, T]``; ``g(t, X)`` may be None for the homogeneous case."""

    op: OperatorSpec
    f: Callable
    g: Optional[Callable] = None
    theta: float = 0.5
    h: float = 1.0 / 32
    tau: float = 1e-3
    radii: tuple = (8.0, 16.0)
    tol: float = 1e-4
    R_eval: float = 1.0
    scheme: str = "backward_euler"
    s: float = 0.0
    T: Optional[float] = None
    name: str = "forced"

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if self.T is None:
            self.T = self.op.horizon

    def datum(self, radius: float) -> GridFunction:
        return GridFunction.from_function(self.f, self.op.dim, radius, self.h)

    def source(self, t: float, radius: float) -> GridFunction:
        mesh = BallMesh(self.op.dim, radius, self.h)
        if self.g is None:
            return GridFunction(np.zeros(mesh.shape), radius, self.h)
        return GridFunction(np.asarray(self.g(t, mesh.coords), dtype=float), radius, self.h)


def solve_forced(p: ForcedProblem, store_every: int = 1, output_times=None) -> Trajectory:
    """Direct theta-scheme solve on the expanding-ball ladder of ``p``."""
    return expanding_ball_solve(p.op, p.f, p.h, p.tau, s=p.s, T=p.T, radii=p.radii, tol=p.tol,
                                g=p.g, scheme=p.scheme, store_every=store_every,
                                output_times=output_times)


def voc_solution(p: ForcedProblem, quad_step: float, radius: Optional[float] = None) -> Trajectory:
    """Variation-of-constants solution at the quadrature nodes ``s + j * quad_step``.

    Uses one homogeneous solve for ``f`` and one per node for ``g(r_j)``,
    all on the fixed ball of radius ``radius`` (default: last radius of the
    ladder).  The returned frames are cropped to ``p.radii[0]``.
    """
    radius = p.radii[-1] if radius is None else radius
    ratio = quad_step / p.tau
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ValueError("quad_step must be a positive multiple of tau")
    M = int(round((p.T - p.s) / quad_step))
    if abs(M * quad_step - (p.T - p.s)) > 1e-9:
        raise ValueError("T - s must be a multiple of quad_step")
    if M + 1 > MAX_VOC_SOLVES:
        raise ValueError(f"variation of constants would need {M + 1} solves (> {MAX_VOC_SOLVES})")
    nodes = p.s + quad_step * np.arange(M + 1)
    mesh = BallMesh(p.op.dim, radius, p.h)
    base = solve_dirichlet(p.op, p.f, radius, p.h, p.tau, s=p.s, T=p.T, scheme=p.scheme,
                           output_times=nodes)
    out = base.frames.copy()
    if p.g is not None:
        gs = [mesh.scatter(np.asarray(p.g(r, mesh.coords), dtype=float)[mesh.unknown])
              for r in nodes]
        for j, r in enumerate(nodes):
            if j < M:
                prop = solve_dirichlet(p.op, gs[j], radius, p.h, p.tau, s=r, T=p.T,
                                       scheme=p.scheme, output_times=nodes[j:]).frames
            else:
                prop = gs[j][None]
            # prop[i] = G(nodes[j + i], r_j) g(r_j)
            for i in range(len(prop)):
                m = j + i
                if m == 0:
                    continue
                w = quad_step * (0.5 if j in (0, m) else 1.0)
                out[m] += w * prop[i]
    traj = Trajectory(nodes, out, radius, p.h, p.tau, base.scheme,
                      dict(base.provenance, method="variation_of_constants",
                           quad_step=quad_step, solves=M + 1))
    return traj.crop(p.radii[0])


@dataclass
class SchauderRow:
    theta: float
    norm_f: float
    norm_g: float
    sup_norm_u_c2theta: float
    ratio: float
    h: float
    tau: float
    name: str = ""

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in SCHAUDER_COLUMNS}


def schauder_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SCHAUDER_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v)
                    for k, v in r.as_dict().items()})
    return buf.getvalue()


def schauder_ratio(p: ForcedProblem, traj: Optional[Trajectory] = None,
                   frame_stride: int = 1, seed: int = 0) -> SchauderRow:
    """``sup_t ||u(t)||_{C^{2+theta}} / (||f||_{C^{2+theta}} + sup_t ||g(t)||_{C^theta})`` on ``B(0, R_eval)``.

    A zero denominator (and hence zero solution) gives ratio 0.
    """
    traj = solve_forced(p) if traj is None else traj
    ks = list(range(0, len(traj), frame_stride))
    if ks[-1] != len(traj) - 1:
        ks.append(len(traj) - 1)
    nf = ck_alpha_norm(p.datum(traj.radius), 2, p.theta, p.R_eval, seed=seed).value
    ng = 0.0
    if p.g is not None:
        ng = max(ck_alpha_norm(p.source(traj.times[k], traj.radius), 0, p.theta, p.R_eval,
                               seed=seed).value for k in ks)
    nu = max(ck_alpha_norm(traj.frame(k), 2, p.theta, p.R_eval, seed=seed).value for k in ks)
    den = nf + ng
    ratio = 0.0 if den == 0 else nu / den
    return SchauderRow(p.theta, nf, ng, nu, ratio, p.h, p.tau, p.name)


def integral_identity_residual(traj: Trajectory, op: OperatorSpec, g: Optional[Callable] = None,
                               R_eval: float = 1.0, exclude_times=(), per_frame: bool = False):
    """``max |u(t) - u(s) - int_s^t (A u + g)|`` over frames and ``B(0, R_eval)``.

    The integral uses the trapezoid rule over the stored frames and ``A u``
    uses the fourth-order stencils.  Frames within half a step of any time in
    ``exclude_times`` are left out of the maximum (they still enter the
    integral).
    """
    X = traj.frame(0).coords
    integrand = []
    mask = None
    for k, t in enumerate(traj.times):
        Au = apply_operator(op, t, traj.frame(k))
        if mask is None:
            mask = Au.region(R_eval)
            if R_eval > Au.valid_radius:
                raise ValueError("R_eval exceeds the trusted region of the frames")
        val = Au.values[mask]
        if g is not None:
            val = val + np.asarray(g(t, X), dtype=float)[mask]
        integrand.append(val)
    integrand = np.array(integrand)
    dt = np.diff(traj.times)[:, None]
    cum = np.concatenate([np.zeros((1, integrand.shape[1])),
                          np.cumsum(0.5 * dt * (integrand[1:] + integrand[:-1]), axis=0)])
    u = traj.frames[:, mask]
    res = np.abs(u - u[0] - cum).max(axis=1)
    keep = np.ones(len(traj), dtype=bool)
    half = 0.5 * (traj.times[1] - traj.times[0]) if len(traj) > 1 else 0.0
    for tj in exclude_times:
        keep &= np.abs(traj.times - tj) > half + 1e-12
    if per_frame:
        return np.where(keep, res, np.nan)
    return float(res[keep].max())
