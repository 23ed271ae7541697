"""Dirichlet problems on balls and the expanding-ball limit.

Space is discretized on the uniform box mesh; nodes with ``|x| >= R`` carry
the homogeneous Dirichlet value.  Second derivatives use the standard
three-point stencil (four-point cross stencil in 2-D), first derivatives are
central unless the cell Peclet number ``|b| h / (2 q)`` exceeds one, in which
case that node falls back to upwinding.  Time stepping is the theta-scheme
with a sparse LU factorization, reused when the operator does not depend on
time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .fields import smoothstep
from .holder_norms import GridFunction, mesh_coords
from .operator_model import OperatorSpec

SCHEMES = {"backward_euler": 1.0, "crank_nicolson": 0.5}
DEFAULT_LADDER = (4.0, 8.0, 16.0, 32.0, 64.0)


class ConvergenceError(RuntimeError):
    """The expanding-ball ladder ended before successive members agreed."""

    def __init__(self, message, differences):
        super().__init__(message)
        self.differences = list(differences)


@dataclass
class Trajectory:
    """Frames ``u(t_k)`` on the box mesh of radius ``radius``."""

    times: np.ndarray
    frames: np.ndarray
    radius: float
    h: float
    tau: float
    scheme: str = "backward_euler"
    provenance: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.frames.ndim - 1

    def __len__(self):
        return len(self.times)

    def frame(self, k: int) -> GridFunction:
        return GridFunction(self.frames[k], self.radius, self.h)

    def index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no frame at t={t}")
        return k

    def at(self, t: float) -> GridFunction:
        return self.frame(self.index(t))

    def crop(self, radius: float) -> "Trajectory":
        if radius >= self.radius:
            return self
        k = int(round((self.radius - radius) / self.h))
        sl = (slice(None),) + tuple(slice(k, self.frames.shape[1] - k) for _ in range(self.dim))
        return Trajectory(self.times, self.frames[sl].copy(), radius, self.h, self.tau,
                          self.scheme, dict(self.provenance))

    def save(self, directory) -> Path:
        """One GridFunction file pair per frame plus ``manifest.json``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        names = []
        for k in range(len(self)):
            name = f"frame_{k:05d}"
            self.frame(k).save(d / name)
            names.append(name)
        manifest = {"times": [float(t) for t in self.times], "frames": names,
                    "R": self.radius, "h": self.h, "tau": self.tau, "scheme": self.scheme,
                    "N": self.dim, "provenance": self.provenance}
        (d / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True,
                                                    default=_json_default))
        return d

    @classmethod
    def load(cls, directory) -> "Trajectory":
        d = Path(directory)
        m = json.loads((d / "manifest.json").read_text())
        frames = np.stack([GridFunction.load(d / name).values for name in m["frames"]])
        return cls(np.asarray(m["times"]), frames, m["R"], m["h"], m["tau"], m["scheme"],
                   m.get("provenance", {}))


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _sample(fn_or_values, X, shape):
    if fn_or_values is None:
        return np.zeros(shape)
    if isinstance(fn_or_values, GridFunction):
        vals = fn_or_values.values
    elif callable(fn_or_values):
        vals = fn_or_values(X)
    else:
        vals = fn_or_values
    vals = np.broadcast_to(np.asarray(vals, dtype=float), shape)
    return np.array(vals)


class BallMesh:
    """Box mesh of ``[-R, R]^N`` with the unknowns at nodes strictly inside the ball."""

    def __init__(self, dim: int, radius: float, h: float):
        n_half = (radius / h)
        if abs(n_half - round(n_half)) > 1e-9 * max(1.0, n_half):
            raise ValueError("radius must be an integer multiple of the mesh width")
        self.dim, self.radius, self.h = dim, float(radius), float(h)
        self.coords = mesh_coords(radius, h, dim)
        self.shape = self.coords.shape[:-1]
        norms = np.sqrt((self.coords**2).sum(-1))
        self.unknown = norms < radius * (1 - 1e-12)
        self.index = -np.ones(self.shape, dtype=np.int64)
        self.index[self.unknown] = np.arange(int(self.unknown.sum()))
        self.grid_idx = np.argwhere(self.unknown)
        self.X = self.coords[self.unknown]

    @property
    def size(self) -> int:
        return len(self.X)

    def neighbour(self, offset) -> np.ndarray:
        nb = self.grid_idx + np.asarray(offset)
        return self.index[tuple(nb.T)]

    def scatter(self, u) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.unknown] = u
        return out


def assemble(op: OperatorSpec, t: float, mesh: BallMesh, advection: str = "auto"):
    """Sparse matrix of the discrete operator at time ``t`` and the number of upwinded nodes."""
    h = mesh.h
    X = mesh.X
    Q = op.diffusion(t, X)
    b = op.drift(t, X)
    c = op.potential(t, X)
    m = mesh.size
    rows, cols, vals = [np.arange(m)], [np.arange(m)], []
    diag = np.array(c, dtype=float)
    upwinded = np.zeros(m, dtype=bool)
    for a in range(mesh.dim):
        qaa = Q[:, a, a]
        ba = b[:, a]
        if advection == "central":
            central = np.ones(m, dtype=bool)
        elif advection == "upwind":
            central = np.zeros(m, dtype=bool)
        else:
            central = np.abs(ba) * h <= 2.0 * qaa
        upwinded |= ~central
        plus = qaa / h**2 + np.where(central, ba / (2 * h), np.maximum(ba, 0.0) / h)
        minus = qaa / h**2 + np.where(central, -ba / (2 * h), np.maximum(-ba, 0.0) / h)
        diag = diag - 2 * qaa / h**2 - np.where(central, 0.0, np.abs(ba) / h)
        for sign, w in ((1, plus), (-1, minus)):
            off = np.zeros(mesh.dim, dtype=int)
            off[a] = sign
            nb = mesh.neighbour(off)
            ok = nb >= 0
            rows.append(np.arange(m)[ok])
            cols.append(nb[ok])
            vals.append(w[ok])
    if mesh.dim == 2:
        q01 = Q[:, 0, 1] + Q[:, 1, 0]
        for off, sgn in (((1, 1), 1.0), ((1, -1), -1.0), ((-1, 1), -1.0), ((-1, -1), 1.0)):
            nb = mesh.neighbour(off)
            ok = nb >= 0
            rows.append(np.arange(m)[ok])
            cols.append(nb[ok])
            vals.append((sgn * q01 / (4 * h**2))[ok])
    vals.insert(0, diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(m, m))
    return A, int(upwinded.sum())


def _theta_of(scheme) -> float:
    if isinstance(scheme, (int, float)):
        th = float(scheme)
    elif scheme in SCHEMES:
        th = SCHEMES[scheme]
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if not 0.5 <= th <= 1.0:
        raise ValueError("theta must lie in [1/2, 1]")
    return th


def _scheme_name(scheme) -> str:
    th = _theta_of(scheme)
    for k, v in SCHEMES.items():
        if v == th:
            return k
    return f"theta={th}"


def solve_dirichlet(op: OperatorSpec, f, radius: float, h: float, tau: float, s: float = 0.0,
                    T: Optional[float] = None, g: Optional[Callable] = None,
                    scheme="backward_euler", advection: str = "auto", store_every: int = 1,
                    output_times=None, keep_radius: Optional[float] = None) -> Trajectory:
    """Solve ``u_t = A u + g`` on ``B(0, radius)`` with zero boundary values, ``u(s) = f``.

    ``f`` is a callable of the coordinates (shape ``S + (N,)``), a
    :class:`GridFunction` on the same mesh, or an array.  ``g(t, X)`` is an
    optional source.  Frames are stored every ``store_every`` steps or at the
    ``output_times`` (rounded to steps); frame 0 is ``f`` itself.
    """
    T = op.horizon if T is None else T
    if T <= s:
        raise ValueError("final time must exceed the initial time")
    if tau <= 0 or h <= 0:
        raise ValueError("tau and h must be positive")
    steps = int(round((T - s) / tau))
    if steps < 1 or abs(steps * tau - (T - s)) > 1e-9 * (T - s):
        raise ValueError("T - s must be an integer multiple of tau")
    theta = _theta_of(scheme)
    mesh = BallMesh(op.dim, radius, h)
    f0 = _sample(f, mesh.coords, mesh.shape)
    u = f0[mesh.unknown].copy()

    if output_times is not None:
        keep = sorted({int(round((t - s) / tau)) for t in output_times if s <= t <= T + 1e-12})
        keep_set = set(keep) | {0}
    else:
        keep_set = set(range(0, steps + 1, store_every)) | {steps}

    def crop(arr):
        if keep_radius is None or keep_radius >= radius:
            return arr
        k = int(round((radius - keep_radius) / h))
        return arr[tuple(slice(k, arr.shape[0] - k) for _ in range(op.dim))]

    times, frames = [s], [crop(f0).copy()]
    I = sp.identity(mesh.size, format="csr")
    src = (lambda t: g(t, mesh.X)) if g is not None else (lambda t: 0.0)
    upwind_max = 0
    lu = None
    A_old, up = assemble(op, s, mesh, advection)
    upwind_max = max(upwind_max, up)
    g_old = src(s)
    for k in range(1, steps + 1):
        t_new = s + k * tau
        if op.time_independent:
            A_new = A_old
        else:
            A_new, up = assemble(op, t_new, mesh, advection)
            upwind_max = max(upwind_max, up)
            lu = None
        if lu is None:
            lu = splu((I - tau * theta * A_new).tocsc())
        g_new = src(t_new)
        rhs = u + tau * (theta * g_new + (1 - theta) * g_old)
        if theta < 1:
            rhs = rhs + tau * (1 - theta) * (A_old @ u)
        u = lu.solve(rhs)
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"non-finite values at t={t_new}")
        A_old, g_old = A_new, g_new
        if k in keep_set:
            times.append(t_new)
            frames.append(crop(mesh.scatter(u)))
    out_radius = radius if keep_radius is None else min(keep_radius, radius)
    prov = {"operator": op.name, "operator_hash": op.config_hash(), "theta": theta,
            "advection": advection, "upwinded_nodes": upwind_max, "solve_radius": radius,
            "steps": steps, "source": g is not None}
    return Trajectory(np.asarray(times), np.stack(frames), out_radius, h, tau,
                      _scheme_name(scheme), prov)


def _region_mask(traj: Trajectory, radius: float) -> np.ndarray:
    return traj.frame(0).region(radius)


def expanding_ball_solve(op: OperatorSpec, f: Callable, h: float, tau: float, s: float = 0.0,
                         T: Optional[float] = None, radii=DEFAULT_LADDER, tol: float = 1e-4,
                         g: Optional[Callable] = None, scheme="backward_euler",
                         advection: str = "auto", meter_radius: Optional[float] = None,
                         keep_radius: Optional[float] = None, store_every: int = 1,
                         output_times=None, strict: bool = True) -> Trajectory:
    """Solve on a ladder of balls until two successive members agree on the metering ball.

    Agreement is the sup over frames and over ``B(0, meter_radius)``
    (default ``radii[0]/2``) of the difference of successive members.  The
    returned trajectory is the last member cropped to ``keep_radius``
    (default ``radii[0]``); its ``provenance["ladder"]`` lists the radii, the
    differences and, for each pair, the largest drop
    ``max(u_small - u_large, 0)`` on the smaller ball.
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radius ladder must be increasing")
    meter = radii[0] / 2 if meter_radius is None else meter_radius
    keep = radii[0] if keep_radius is None else keep_radius
    if meter > keep:
        raise ValueError("metering radius must not exceed the kept radius")
    prev = None
    diffs, defects, used = [], [], []
    converged = False
    for R in radii:
        cur = solve_dirichlet(op, f, R, h, tau, s=s, T=T, g=g, scheme=scheme,
                              advection=advection, store_every=store_every,
                              output_times=output_times)
        used.append(R)
        if prev is not None:
            small = prev
            big = cur.crop(prev.radius)
            mask_common = _region_mask(small, small.radius)
            drop = (small.frames - big.frames)[:, mask_common]
            defects.append(float(max(drop[1:].max(initial=0.0), 0.0)))
            a = small.crop(meter)
            b = big.crop(meter)
            m = _region_mask(a, meter)
            diffs.append(float(np.abs(a.frames - b.frames)[:, m].max()))
            if diffs[-1] <= tol:
                converged = True
                break
        prev = cur
    if len(radii) == 1:
        converged = True
    ladder = {"radii": used, "differences": diffs, "monotonicity_defects": defects,
              "converged": converged, "tol": tol, "meter_radius": meter}
    if not converged and strict:
        raise ConvergenceError(f"ladder {radii} did not reach tol={tol}; differences {diffs}",
                               diffs)
    out = cur.crop(keep)
    out.provenance = dict(cur.provenance, ladder=ladder)
    return out


def verify_sup_bound(traj: Trajectory, op: OperatorSpec, radius: Optional[float] = None) -> float:
    """``max_k ||u(t_k)||_inf / (exp(c0 (t_k - s)) ||f||_inf)``; ``c0`` is the potential bound."""
    if op.c0 is None:
        raise ValueError("operator has no declared potential bound c0")
    if radius is None:
        vals = traj.frames.reshape(len(traj), -1)
    else:
        vals = traj.frames[:, _region_mask(traj, radius)]
    fnorm = float(np.abs(vals[0]).max())
    sups = np.abs(vals).max(axis=1)
    if fnorm == 0.0:
        return 0.0 if np.all(sups == 0) else float("inf")
    growth = np.exp(op.c0 * (traj.times - traj.times[0]))
    return float((sups / (growth * fnorm)).max())


@dataclass
class SignVerdict:
    excursion: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.excursion <= self.tolerance


def sign_preservation_check(traj: Trajectory, tolerance: Optional[float] = None) -> SignVerdict:
    """Largest negative excursion of a trajectory started from nonnegative data."""
    tol = 10 * traj.h**2 + 10 * traj.tau if tolerance is None else tolerance
    return SignVerdict(float(max(0.0, -traj.frames.min())), tol)


def localization_split_check(op: OperatorSpec, f: Callable, x0, radius: float, h: float,
                             tau: float, **kw) -> float:
    """``max |u_f - u_{eta f} - u_{(1-eta) f}|`` with a smooth cutoff around ``x0``.

    The cutoff is 1 on ``B(x0, 1)`` and 0 outside ``B(x0, 2)``.  By linearity
    the result is at rounding level.
    """
    x0 = np.asarray(x0, dtype=float)

    def eta(X):
        return 1.0 - smoothstep(np.sqrt(((X - x0) ** 2).sum(-1)) - 1.0)

    u = solve_dirichlet(op, f, radius, h, tau, **kw)
    u1 = solve_dirichlet(op, lambda X: eta(X) * f(X), radius, h, tau, **kw)
    u2 = solve_dirichlet(op, lambda X: (1 - eta(X)) * f(X), radius, h, tau, **kw)
    return float(np.abs(u.frames - u1.frames - u2.frames).max())
