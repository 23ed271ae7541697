"""Grid functions on ball meshes and discrete Hölder norms.

Derivatives use fourth-order central stencils.  Points whose stencil would
leave the valid region are trimmed through the ``margin`` bookkeeping rather
than treated with one-sided formulas, so every reported value comes from the
same interior stencil.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from math import ceil, sqrt
from pathlib import Path

import numpy as np

#: Central fourth-order stencils: order -> (offsets, weights); divide by h**order.
STENCILS = {
    1: (np.array([-2, -1, 1, 2]), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0),
    2: (np.array([-2, -1, 0, 1, 2]), np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0),
    3: (np.array([-3, -2, -1, 1, 2, 3]), np.array([1.0, -8.0, 13.0, -13.0, 8.0, -1.0]) / 8.0),
}
HALF_WIDTH = {0: 0, 1: 2, 2: 2, 3: 3}

DEFAULT_PAIR_CAP = 2_000_000


class InsufficientMarginError(ValueError):
    """Raised when trimming leaves fewer than two valid mesh layers."""


@dataclass(frozen=True)
class GridFunction:
    """Nodal values on the uniform mesh of the box ``[-R, R]^N``.

    The mesh has ``n = 2R/h + 1`` points per axis; the points with
    ``|x| <= R`` form the ball mesh.  Values are trusted only on
    ``|x| <= R - margin*h``.
    """

    values: np.ndarray
    radius: float
    h: float
    margin: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim not in (1, 2) or len(set(v.shape)) != 1:
            raise ValueError("values must be a 1-D array or a square 2-D array")
        if self.h <= 0 or self.radius <= 0:
            raise ValueError("radius and h must be positive")
        if abs(self.h * (v.shape[0] - 1) - 2 * self.radius) > 1e-9 * self.radius:
            raise ValueError("mesh size does not match 2R/h + 1 points per axis")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.radius, self.radius, self.n)

    @property
    def coords(self) -> np.ndarray:
        """Coordinates with shape ``values.shape + (N,)``."""
        return mesh_coords(self.radius, self.h, self.dim)

    @property
    def norms(self) -> np.ndarray:
        return np.sqrt((self.coords**2).sum(-1))

    @property
    def valid_radius(self) -> float:
        return self.radius - self.margin * self.h

    def region(self, R_eval: float) -> np.ndarray:
        """Boolean mask of mesh points in the closed ball of radius ``R_eval``."""
        return self.norms <= R_eval * (1 + 1e-12) + 1e-14

    def with_values(self, values, margin=None) -> "GridFunction":
        return replace(self, values=np.asarray(values, dtype=float),
                       margin=self.margin if margin is None else margin)

    @classmethod
    def from_function(cls, fn, dim: int, radius: float, h: float) -> "GridFunction":
        X = mesh_coords(radius, h, dim)
        return cls(np.broadcast_to(np.asarray(fn(X), dtype=float), X.shape[:-1]).copy(), radius, h)

    def crop(self, radius: float) -> "GridFunction":
        """Restrict to the sub-box ``[-radius, radius]^N`` sharing the same nodes."""
        k = int(round((self.radius - radius) / self.h))
        if k < 0 or abs(k * self.h - (self.radius - radius)) > 1e-9 * self.radius:
            raise ValueError("crop radius must be a mesh-aligned value not exceeding R")
        if k == 0:
            return self
        sl = tuple(slice(k, self.n - k) for _ in range(self.dim))
        return GridFunction(self.values[sl].copy(), radius, self.h, max(0, self.margin - k))

    def coarsen(self) -> "GridFunction":
        """Subsample every other node (mesh width 2h); requires an even node count per half-axis."""
        if (self.n - 1) % 2:
            raise ValueError("cannot coarsen: odd number of mesh cells")
        sl = tuple(slice(None, None, 2) for _ in range(self.dim))
        return GridFunction(self.values[sl].copy(), self.radius, 2 * self.h, ceil(self.margin / 2))

    # persistence ------------------------------------------------------------
    def sidecar(self) -> dict:
        return {"N": self.dim, "R": self.radius, "h": self.h, "margin": self.margin}

    def save(self, path) -> None:
        """Write ``<path>.bin`` (little-endian float64, C order) and ``<path>.json``."""
        path = Path(path)
        self.values.astype("<f8").tofile(path.with_suffix(".bin"))
        path.with_suffix(".json").write_text(json.dumps(self.sidecar(), sort_keys=True))

    @classmethod
    def load(cls, path) -> "GridFunction":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        raw = np.fromfile(path.with_suffix(".bin"), dtype="<f8")
        n = int(round(2 * meta["R"] / meta["h"])) + 1
        return cls(raw.reshape((n,) * int(meta["N"])), float(meta["R"]), float(meta["h"]),
                   int(meta["margin"]))


def mesh_coords(radius: float, h: float, dim: int) -> np.ndarray:
    n = int(round(2 * radius / h)) + 1
    axis = np.linspace(-radius, radius, n)
    if dim == 1:
        return axis[:, None]
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack(grids, axis=-1)


@dataclass
class HolderNormEstimate:
    """Value of a discrete ``C^{k+alpha}`` norm with its per-term breakdown."""

    k: int
    alpha: float
    R_eval: float
    value: float
    terms: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = {"k": self.k, "alpha": self.alpha, "R_eval": self.R_eval, "value": self.value}
        row.update(self.terms)
        return row


def _apply_axis(values: np.ndarray, order: int, axis: int, h: float) -> np.ndarray:
    offsets, weights = STENCILS[order]
    hw = HALF_WIDTH[order]
    out = np.zeros_like(values)
    n = values.shape[axis]
    target = [slice(None)] * values.ndim
    target[axis] = slice(hw, n - hw)
    acc = np.zeros_like(values[tuple(target)])
    for off, w in zip(offsets, weights):
        src = [slice(None)] * values.ndim
        src[axis] = slice(hw + off, n - hw + off)
        acc += w * values[tuple(src)]
    out[tuple(target)] = acc / h**order
    return out


def derivative(f: GridFunction, multi_index) -> GridFunction:
    """Fourth-order central approximation of ``D^beta f``.

    ``multi_index`` lists the derivative order along each axis (an int is
    accepted in one dimension).  The margin grows by the Euclidean reach of
    the composed stencil.
    """
    if isinstance(multi_index, (int, np.integer)):
        multi_index = (int(multi_index),)
    multi_index = tuple(int(m) for m in multi_index)
    if len(multi_index) != f.dim:
        raise ValueError("multi-index length must equal the dimension")
    if any(m < 0 for m in multi_index) or sum(multi_index) > 3:
        raise ValueError("derivative orders must be nonnegative with total order <= 3")
    reach = sqrt(sum(HALF_WIDTH[m] ** 2 for m in multi_index))
    margin = f.margin + int(ceil(reach - 1e-12))
    if f.radius - margin * f.h < 2 * f.h:
        raise InsufficientMarginError(
            f"derivative {multi_index} needs margin {margin} but the mesh has only "
            f"{int(f.radius / f.h)} layers")
    vals = f.values
    for axis, m in enumerate(multi_index):
        if m:
            vals = _apply_axis(vals, m, axis, f.h)
    return GridFunction(vals, f.radius, f.h, margin)


def multi_indices(dim: int, order: int):
    """Multi-indices of total order ``order`` (each unordered derivative once)."""
    return [m for m in itertools.product(range(order + 1), repeat=dim) if sum(m) == order]


def _check_region(f: GridFunction, R_eval: float) -> np.ndarray:
    if R_eval <= 0:
        raise ValueError("R_eval must be positive")
    if R_eval > f.valid_radius + 1e-9 * f.radius:
        raise InsufficientMarginError(
            f"R_eval={R_eval} exceeds the trusted radius {f.valid_radius} (margin {f.margin})")
    mask = f.region(R_eval)
    if not mask.any():
        raise ValueError("evaluation region contains no mesh points")
    return mask


def sup_norm(f: GridFunction, R_eval: float | None = None) -> float:
    """Maximum of ``|f|`` over mesh points of the closed ball of radius ``R_eval``."""
    R_eval = f.valid_radius if R_eval is None else R_eval
    mask = _check_region(f, R_eval)
    return float(np.abs(f.values[mask]).max())


def _offsets(dim: int, h: float, max_dist: float = 1.0):
    """Integer offsets k in a half space with ``0 < |k| h <= max_dist``, sorted by length."""
    m = int(np.floor(max_dist / h + 1e-9))
    rng = range(-m, m + 1)
    out = []
    for k in itertools.product(rng, repeat=dim):
        if not any(k):
            continue
        first = next(c for c in k if c != 0)
        if first < 0:
            continue
        d = h * sqrt(sum(c * c for c in k))
        if d <= max_dist * (1 + 1e-12):
            out.append((d, k))
    out.sort()
    return out


def _shift_slices(k, n):
    a, b = [], []
    for c in k:
        if c >= 0:
            a.append(slice(0, n - c))
            b.append(slice(c, n))
        else:
            a.append(slice(-c, n))
            b.append(slice(0, n + c))
    return tuple(a), tuple(b)


def holder_seminorm(f: GridFunction, alpha: float, R_eval: float | None = None,
                    pair_cap: int = DEFAULT_PAIR_CAP, seed: int = 0) -> float:
    """``max |f(x)-f(y)| / |x-y|^alpha`` over mesh pairs with ``0 < |x-y| <= 1`` in the region.

    The maximum is exhaustive when the pair count is at most ``pair_cap``.
    Otherwise all pairs at the shortest offsets are visited until half the
    budget is spent, and the remaining offsets are sampled uniformly with a
    generator seeded by ``seed``.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    R_eval = f.valid_radius if R_eval is None else R_eval
    mask = _check_region(f, R_eval)
    v = f.values
    n = f.n
    offsets = _offsets(f.dim, f.h)
    counts = []
    for _, k in offsets:
        a, b = _shift_slices(k, n)
        counts.append(int(np.count_nonzero(mask[a] & mask[b])))
    total = sum(counts)
    best = 0.0
    if total <= pair_cap:
        for (d, k), c in zip(offsets, counts):
            if not c:
                continue
            a, b = _shift_slices(k, n)
            both = mask[a] & mask[b]
            diff = np.abs(v[a][both] - v[b][both]).max()
            best = max(best, diff / d**alpha)
        return float(best)
    rng = np.random.default_rng(seed)
    budget = pair_cap // 2
    i = 0
    while i < len(offsets) and counts[i] <= budget:
        d, k = offsets[i]
        if counts[i]:
            a, b = _shift_slices(k, n)
            both = mask[a] & mask[b]
            best = max(best, np.abs(v[a][both] - v[b][both]).max() / d**alpha)
        budget -= counts[i]
        i += 1
    rest = offsets[i:]
    if rest:
        per = max(1, (pair_cap - pair_cap // 2) // len(rest))
        pts = np.argwhere(mask)
        for d, k in rest:
            idx = pts[rng.integers(0, len(pts), size=per)]
            other = idx + np.asarray(k)
            ok = np.all((other >= 0) & (other < n), axis=1)
            idx, other = idx[ok], other[ok]
            ok = mask[tuple(other.T)]
            idx, other = idx[ok], other[ok]
            if len(idx):
                diff = np.abs(v[tuple(idx.T)] - v[tuple(other.T)]).max()
                best = max(best, diff / d**alpha)
    return float(best)


def ck_alpha_norm(f: GridFunction, k: int, alpha: float, R_eval: float | None = None,
                  pair_cap: int = DEFAULT_PAIR_CAP, seed: int = 0) -> HolderNormEstimate:
    """Discrete ``C^{k+alpha}`` norm on the ball of radius ``R_eval``.

    Sum of the sup norms of all derivatives up to order ``k`` plus, when
    ``alpha > 0``, the ``alpha``-seminorms of the order-``k`` derivatives.
    """
    if k < 0 or k > 3 or not 0 <= alpha < 1:
        raise ValueError("need 0 <= k <= 3 and 0 <= alpha < 1")
    derivs = {}
    for order in range(k + 1):
        for m in multi_indices(f.dim, order):
            derivs[m] = f if order == 0 else derivative(f, m)
    trusted = min(g.valid_radius for g in derivs.values())
    R_eval = trusted if R_eval is None else R_eval
    terms = {}
    total = 0.0
    for m, g in derivs.items():
        s = sup_norm(g, R_eval)
        terms["sup_D" + "".join(map(str, m))] = s
        total += s
    if alpha > 0:
        for m in multi_indices(f.dim, k):
            s = holder_seminorm(derivs[m], alpha, R_eval, pair_cap=pair_cap, seed=seed)
            terms["semi_D" + "".join(map(str, m))] = s
            total += s
    return HolderNormEstimate(k, alpha, R_eval, total, terms)


def interpolation_inequality_check(f: GridFunction, theta: float, R_eval: float | None = None,
                                   **kw) -> float:
    """Largest of the two scale-free interpolation ratios.

    ``||f||_{C^1} / (||f||_inf^{(1+theta)/(2+theta)} ||f||_{C^{2+theta}}^{1/(2+theta)})`` and
    ``||f||_{C^2} / (||f||_inf^{theta/(2+theta)} ||f||_{C^{2+theta}}^{2/(2+theta)})``.
    The zero function gives 0.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    top = ck_alpha_norm(f, 2, theta, R_eval, **kw)
    R = top.R_eval
    n0 = sup_norm(f, R)
    if n0 == 0.0:
        return 0.0
    n1 = ck_alpha_norm(f, 1, 0.0, R).value
    n2 = ck_alpha_norm(f, 2, 0.0, R).value
    n2t = top.value
    e = 2.0 + theta
    r1 = n1 / (n0 ** ((1 + theta) / e) * n2t ** (1 / e))
    r2 = n2 / (n0 ** (theta / e) * n2t ** (2 / e))
    return float(max(r1, r2))
