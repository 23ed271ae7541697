"""Batch experiments: configs, run directories, manifests and reports.

A run executes one experiment kind, writes its CSV tables (and, for
``solve``, the trajectory) into the run directory, records one row per
stage assertion in ``stages.csv`` and finally writes ``manifest.json``
atomically.  A manifest is present only when the run completed; it lists
every output file with its SHA-256 checksum so :func:`report` can detect
missing or altered outputs.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import platform
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .data import make_datum, make_oracle, make_source
from .holder_norms import InsufficientMarginError
from .inhomogeneous import (ForcedProblem, integral_identity_residual, schauder_csv,
                            schauder_ratio, solve_forced, voc_solution)
from .mollification import solve_discontinuous
from .operator_model import OperatorSpec, check_hypotheses, operator_from_json
from .smoothing_lab import UnderResolvedError, measure_smoothing, smoothing_csv
from .svgplot import line_plot
from .truncated_solver import (ConvergenceError, Trajectory, expanding_ball_solve,
                               sign_preservation_check, verify_sup_bound)

KINDS = ("check-hypotheses", "solve", "smoothing", "schauder", "mollify-study")
MANIFEST = "manifest.json"
IN_PROGRESS = ".run-in-progress"
STAGE_COLUMNS = ("stage", "status", "value", "threshold", "detail")
THREADS_ENV = "SCHAUDER_LAB_THREADS"

#: Failures raised by the numerical stages; anything else is a bug and propagates.
NUMERICAL_ERRORS = (ConvergenceError, UnderResolvedError, InsufficientMarginError,
                    FloatingPointError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    """The experiment config violates the schema or names unknown objects."""


class ChecksumError(RuntimeError):
    """A run directory has no manifest or its outputs do not match the recorded checksums."""


# ---------------------------------------------------------------------------
# configuration

_TUPLE_FIELDS = ("radii", "time_ladder", "n_ladder", "samples")


@dataclass
class ExperimentConfig:
    """Everything a run needs; see ``schemas/experiment_config.schema.json``."""

    kind: str
    operator: object
    datum: object = field(default_factory=lambda: {"name": "gaussian"})
    source: object = None
    oracle: object = None
    preset: Optional[str] = None
    h: float = 1.0 / 32
    tau: float = 1e-3
    radii: tuple = (8.0, 16.0)
    tol: float = 1e-4
    scheme: str = "backward_euler"
    theta: float = 0.5
    pairs: tuple = ({"alpha": 0.0, "beta": 1.0},)
    exponent_tol: float = 0.15
    time_ladder: Optional[tuple] = None
    n_ladder: tuple = (4.0, 16.0, 64.0, 256.0)
    R_eval: float = 1.0
    quad_step: Optional[float] = None
    box_radius: float = 8.0
    samples: tuple = (9, 33)
    box_doubling: bool = True
    drift_tol: float = 0.05
    oracle_tol: Optional[float] = None
    frames: int = 21
    refine: bool = True
    refine_tol: float = 0.10
    seed: int = 0
    out: Optional[str] = None

    def to_json(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            out[f.name] = copy.deepcopy(v)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, obj) -> "ExperimentConfig":
        """Validate against the schema and build a config (accepts a dict or JSON text)."""
        if isinstance(obj, str):
            try:
                obj = json.loads(obj)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from None
        obj = _jsonable(obj)
        validate_config(obj)
        kw = dict(obj)
        for name in _TUPLE_FIELDS:
            if kw.get(name) is not None:
                kw[name] = tuple(kw[name])
        if "pairs" in kw:
            kw["pairs"] = tuple(dict(p) for p in kw["pairs"])
        cfg = cls(**kw)
        if cfg.kind == "smoothing":
            for p in cfg.pairs:
                if not p["alpha"] < p["beta"]:
                    raise ConfigError("smoothing pairs need alpha < beta")
        return cfg

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON, ignoring the output directory."""
        body = self.to_json()
        body.pop("out")
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _schema(name: str) -> dict:
    return json.loads(resources.files("schauder_lab").joinpath("schemas", name).read_text())


def validate_config(obj: dict) -> None:
    """Raise :class:`ConfigError` when ``obj`` violates the experiment schema."""
    import jsonschema
    from referencing import Registry, Resource

    op_schema = _schema("operator.schema.json")
    registry = Registry().with_resource("operator.schema.json",
                                        Resource.from_contents(op_schema))
    validator = jsonschema.Draft202012Validator(_schema("experiment_config.schema.json"),
                                                registry=registry)
    errors = sorted(validator.iter_errors(obj), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.path) or "<root>"
        raise ConfigError(f"config error at {where}: {e.message}")


def load_config(path) -> ExperimentConfig:
    """Read a config file; a relative operator path is taken relative to the file."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    op = obj.get("operator") if isinstance(obj, dict) else None
    if isinstance(op, str) and not Path(op).is_absolute():
        obj["operator"] = str((path.parent / op).resolve())
    return ExperimentConfig.from_json(obj)


def build_operator(cfg: ExperimentConfig) -> OperatorSpec:
    try:
        return operator_from_json(cfg.operator)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid operator: {exc}") from None


def thread_count(threads: Optional[int] = None) -> int:
    """Explicit value, else ``SCHAUDER_LAB_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else 1
    return max(1, int(threads))


def _map(fn, items, threads: int):
    """Ordered map; results are merged in input order whatever the thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# stages and manifest


@dataclass
class Stage:
    name: str
    passed: bool
    value: float = float("nan")
    threshold: float = float("nan")
    detail: str = ""

    def as_row(self) -> dict:
        return {"stage": self.name, "status": "pass" if self.passed else "fail",
                "value": _num(self.value), "threshold": _num(self.threshold),
                "detail": self.detail}


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    v = float(v)
    return "" if math.isnan(v) else f"{v:.10g}"


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (_num(r[k]) if isinstance(r[k], (float, np.floating)) else r[k])
                    for k in columns})
    return buf.getvalue()


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    kind: str
    versions: dict
    wall_clock_seconds: float
    stages: list
    outputs: list
    config: dict

    @property
    def passed(self) -> bool:
        return all(s["status"] == "pass" for s in self.stages)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def checksums(self) -> dict:
        return {o["path"]: o["sha256"] for o in self.outputs}

    def to_json(self) -> dict:
        return {"config_hash": self.config_hash, "kind": self.kind, "versions": self.versions,
                "wall_clock_seconds": self.wall_clock_seconds, "status":
                "pass" if self.passed else "fail", "stages": self.stages,
                "outputs": self.outputs, "config": self.config}

    @classmethod
    def load(cls, run_dir) -> "RunManifest":
        path = Path(run_dir) / MANIFEST
        if not path.is_file():
            raise ChecksumError(f"{run_dir}: no {MANIFEST}; the run is missing or incomplete")
        try:
            m = json.loads(path.read_text())
            return cls(m["config_hash"], m["kind"], m["versions"], m["wall_clock_seconds"],
                       m["stages"], m["outputs"], m["config"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ChecksumError(f"{path}: corrupt manifest ({exc})") from None


def versions() -> dict:
    import scipy

    from . import __version__

    return {"schauder_lab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _prepare_dir(out: Path) -> None:
    """Create ``out`` or clear a previous (complete or interrupted) run in it."""
    if out.exists():
        if not out.is_dir():
            raise ConfigError(f"{out} exists and is not a directory")
        entries = list(out.iterdir())
        ours = (out / MANIFEST).exists() or (out / IN_PROGRESS).exists()
        if entries and not ours:
            raise ConfigError(f"{out} is not empty and does not hold a previous run")
        manifest = out / MANIFEST
        if manifest.exists():
            manifest.unlink()
        for p in out.iterdir():
            if p.is_dir():
                shutil.rmtree(p)
            else:
                p.unlink()
    out.mkdir(parents=True, exist_ok=True)
    (out / IN_PROGRESS).write_text("")


def _write_manifest(out: Path, manifest: RunManifest) -> None:
    tmp = out / (MANIFEST + ".tmp")
    tmp.write_text(json.dumps(manifest.to_json(), indent=1, sort_keys=True))
    os.replace(tmp, out / MANIFEST)


# ---------------------------------------------------------------------------
# experiment kinds


class _Context:
    def __init__(self, cfg: ExperimentConfig, op: OperatorSpec, out: Path, threads: int):
        self.cfg, self.op, self.out, self.threads = cfg, op, out, threads
        self.stages: list = []

    def write(self, name: str, text: str) -> None:
        (self.out / name).write_text(text)

    def stage(self, name, passed, value=float("nan"), threshold=float("nan"), detail=""):
        self.stages.append(Stage(name, bool(passed), value, threshold, detail))


def _run_check_hypotheses(ctx: _Context) -> None:
    cfg, op = ctx.cfg, ctx.op
    rep = check_hypotheses(op, cfg.box_radius, tuple(cfg.samples))
    ctx.write("hypotheses.csv", rep.to_csv())
    ctx.write("hypotheses.json", json.dumps(rep.to_json(), indent=1, sort_keys=True,
                                            default=float))
    bad = [c.id for c in rep.failures()]
    ctx.stage("hypotheses", rep.passed, len(bad), 0,
              "all conditions pass" if not bad else "failed: " + ",".join(bad))
    if not cfg.box_doubling:
        return
    rep2 = check_hypotheses(op, 2 * cfg.box_radius, tuple(cfg.samples))
    ctx.write("hypotheses_2R.csv", rep2.to_csv())
    c1, c2 = rep.fitted_constants, rep2.fitted_constants
    rows, worst, nonfinite = [], 0.0, []
    for k in sorted(c1):
        if k not in c2:
            continue
        a, b = float(c1[k]), float(c2[k])
        if not (math.isfinite(a) and math.isfinite(b)):
            nonfinite.append(k)
            drift = float("inf")
        else:
            drift = abs(b - a) / max(abs(a), 1e-300) if a != b else 0.0
        worst = max(worst, drift)
        rows.append({"constant": k, "box_R": a, "box_2R": b, "drift": drift})
    ctx.write("constants.csv", _csv(rows, ("constant", "box_R", "box_2R", "drift")))
    ctx.stage("constant_stability", worst <= cfg.drift_tol and not nonfinite, worst,
              cfg.drift_tol, "non-finite: " + ",".join(nonfinite) if nonfinite else
              "relative drift of fitted constants under box doubling")


def _nonnegative(f, op: OperatorSpec, radius: float, h: float) -> bool:
    from .holder_norms import mesh_coords

    return bool(np.all(np.asarray(f(mesh_coords(radius, h, op.dim))) >= 0))


def _thin(traj: Trajectory, frames: int) -> Trajectory:
    idx = np.unique(np.round(np.linspace(0, len(traj) - 1, min(frames, len(traj)))).astype(int))
    return Trajectory(traj.times[idx], traj.frames[idx], traj.radius, traj.h, traj.tau,
                      traj.scheme, traj.provenance)


def _oracle_error(traj: Trajectory, oracle, R_eval: float) -> float:
    g = traj.frame(0)
    m = g.region(R_eval)
    X = g.coords[m]
    return float(max(np.abs(traj.frames[k][m] - oracle(t, X)).max()
                     for k, t in enumerate(traj.times)))


def _run_solve(ctx: _Context) -> None:
    cfg, op = ctx.cfg, ctx.op
    f, g = make_datum(cfg.datum), make_source(cfg.source)
    try:
        traj = expanding_ball_solve(op, f, cfg.h, cfg.tau, T=op.horizon, radii=cfg.radii,
                                    tol=cfg.tol, g=g, scheme=cfg.scheme)
    except ConvergenceError as exc:
        ctx.stage("ladder_convergence", False, max(exc.differences, default=float("nan")),
                  cfg.tol, str(exc))
        return
    lad = traj.provenance["ladder"]
    diffs, defects = lad["differences"], lad["monotonicity_defects"]
    ctx.stage("ladder_convergence", lad["converged"], diffs[-1] if diffs else float("nan"),
              cfg.tol, f"radii used: {lad['radii']}")
    rows = [{"radius": r, "difference": d, "monotonicity_defect": m}
            for r, d, m in zip(lad["radii"][1:], diffs, defects)]
    ctx.write("ladder.csv", _csv(rows, ("radius", "difference", "monotonicity_defect")))
    slack = 10 * (cfg.h**2 + cfg.tau)
    sups = np.abs(traj.frames.reshape(len(traj), -1)).max(axis=1)
    if g is None and op.c0 is not None:
        ratio = verify_sup_bound(traj, op)
        ctx.stage("sup_bound", ratio <= 1 + slack, ratio, 1 + slack,
                  "max_t ||u(t)|| / (exp(c0 t) ||f||)")
        fnorm = sups[0]
        bound = np.exp(op.c0 * (traj.times - traj.times[0])) * fnorm
    else:
        bound = np.full(len(traj), np.nan)
    if g is None and _nonnegative(f, op, traj.radius, cfg.h):
        worst = max(defects, default=0.0)
        ctx.stage("monotone_ladder", worst <= 10 * cfg.h**2, worst, 10 * cfg.h**2,
                  "largest drop between successive balls")
        dec = all(b < a for a, b in zip(diffs, diffs[1:]))
        ctx.stage("ladder_differences_decreasing", dec, len(diffs), float("nan"),
                  " ".join(f"{d:.3g}" for d in diffs))
        sv = sign_preservation_check(traj)
        ctx.stage("sign_preservation", sv.passed, sv.excursion, sv.tolerance,
                  "largest negative excursion")
    oracle = make_oracle(cfg.oracle)
    if oracle is not None and cfg.oracle_tol is not None:
        err = _oracle_error(traj, oracle, cfg.R_eval)
        ctx.stage("oracle", err <= cfg.oracle_tol, err, cfg.oracle_tol,
                  f"sup error on B(0,{cfg.R_eval:g})")
    rows = [{"time": float(t), "sup_norm": float(s), "sup_bound": float(b)}
            for t, s, b in zip(traj.times, sups, bound)]
    ctx.write("solve_summary.csv", _csv(_thin_rows(rows, cfg.frames),
                                        ("time", "sup_norm", "sup_bound")))
    _thin(traj, cfg.frames).save(ctx.out / "trajectory")


def _thin_rows(rows, frames):
    idx = np.unique(np.round(np.linspace(0, len(rows) - 1, min(frames, len(rows)))).astype(int))
    return [rows[i] for i in idx]


def _run_smoothing(ctx: _Context) -> None:
    cfg, op = ctx.cfg, ctx.op

    def one(pair):
        f = make_datum(pair.get("datum", cfg.datum))
        try:
            return measure_smoothing(op, f, pair["alpha"], pair["beta"], cfg.h, cfg.tau,
                                     ladder=cfg.time_ladder, radii=cfg.radii, tol=cfg.tol,
                                     R_eval=cfg.R_eval, scheme=cfg.scheme, seed=cfg.seed)
        except (UnderResolvedError, ConvergenceError, InsufficientMarginError) as exc:
            return exc

    fits = _map(one, cfg.pairs, ctx.threads)
    good = []
    for pair, fit in zip(cfg.pairs, fits):
        name = f"exponent_{pair['alpha']:g}_{pair['beta']:g}"
        tol = pair.get("tol", cfg.exponent_tol)
        if isinstance(fit, Exception):
            ctx.stage(name, False, float("nan"), tol, f"{type(fit).__name__}: {fit}")
            continue
        good.append(fit)
        ctx.stage(name, fit.deviation <= tol, fit.exponent, tol,
                  f"predicted {fit.predicted:g}, resolution gap {fit.resolution_gap:.3g}")
    ctx.write("smoothing.csv", smoothing_csv(good))


def _schauder_problem(cfg, op, h, tau) -> ForcedProblem:
    return ForcedProblem(op, make_datum(cfg.datum), make_source(cfg.source), theta=cfg.theta,
                         h=h, tau=tau, radii=tuple(cfg.radii), tol=cfg.tol, R_eval=cfg.R_eval,
                         scheme=cfg.scheme, name=cfg.preset or op.name)


def _run_schauder(ctx: _Context) -> None:
    cfg, op = ctx.cfg, ctx.op
    steps = int(round(op.horizon / cfg.tau))
    every = max(1, steps // max(1, cfg.frames - 1))
    levels = [(cfg.h, cfg.tau, every)]
    if cfg.refine:
        levels.append((cfg.h / 2, cfg.tau / 4, 4 * every))

    def one(level):
        h, tau, store = level
        p = _schauder_problem(cfg, op, h, tau)
        try:
            traj = solve_forced(p, store_every=store)
        except ConvergenceError as exc:
            return exc
        return schauder_ratio(p, traj, seed=cfg.seed), traj

    results = _map(one, levels, ctx.threads)
    rows = []
    for (h, tau, _), res in zip(levels, results):
        if isinstance(res, Exception):
            ctx.stage(f"schauder_h{h:g}", False, float("nan"), float("nan"), str(res))
            continue
        rows.append(res[0])
    ctx.write("schauder.csv", schauder_csv(rows))
    for r in rows:
        ctx.stage(f"schauder_ratio_h{r.h:g}", math.isfinite(r.ratio), r.ratio, float("nan"),
                  "sup_t ||u||_{C^{2+theta}} / (||f||_{C^{2+theta}} + sup_t ||g||_{C^theta})")
    if cfg.refine and len(rows) == 2:
        change = abs(rows[1].ratio - rows[0].ratio) / max(rows[0].ratio, 1e-300)
        ctx.stage("refinement_stability", change <= cfg.refine_tol, change, cfg.refine_tol,
                  "relative change of the ratio under h/2, tau/4")
    if cfg.quad_step is not None and not isinstance(results[0], Exception):
        p = _schauder_problem(cfg, op, cfg.h, cfg.tau)
        direct = results[0][1]
        try:
            voc = voc_solution(p, cfg.quad_step)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        R = min(voc.radius, direct.radius)
        v, d = voc.crop(R), direct.crop(R)
        diffs = []
        for k, t in enumerate(v.times):
            j = int(np.argmin(np.abs(d.times - t)))
            if abs(d.times[j] - t) < 1e-9:
                diffs.append({"time": float(t),
                              "sup_difference": float(np.abs(v.frames[k] - d.frames[j]).max())})
        if not diffs:
            ctx.stage("voc_consistency", False, float("nan"), float("nan"),
                      "quadrature nodes do not coincide with stored frames")
            return
        worst = max(r["sup_difference"] for r in diffs)
        tol = 10 * (cfg.tau + cfg.h**2 + cfg.quad_step**2)
        ctx.write("voc.csv", _csv(diffs, ("time", "sup_difference")))
        ctx.stage("voc_consistency", worst <= tol, worst, tol,
                  "variation of constants against the direct solve")


def _run_mollify_study(ctx: _Context) -> None:
    cfg, op = ctx.cfg, ctx.op
    f, g = make_datum(cfg.datum), make_source(cfg.source)
    res = solve_discontinuous(op, f, g, n_values=cfg.n_ladder, h=cfg.h, tau=cfg.tau,
                              radii=cfg.radii, R_eval=cfg.R_eval, scheme=cfg.scheme,
                              ladder_tol=cfg.tol)
    ctx.write("convergence.csv", res.csv())
    for col in ("increment_sup", "increment_grad", "increment_hess"):
        vals = [r[col] for r in res.rows[1:]]
        dec = len(vals) >= 2 and all(b < a for a, b in zip(vals, vals[1:]))
        ctx.stage(f"{col}_decreasing", dec, vals[-1] if vals else float("nan"), float("nan"),
                  " ".join(f"{v:.3g}" for v in vals))
    slack = 10 * (cfg.tau + cfg.h**2)
    worst = max(r["residual"] for r in res.rows)
    ctx.stage("member_residual", worst <= slack, worst, slack,
              "integral identity of each member against its mollified operator")
    limit = integral_identity_residual(res.final, op, g, cfg.R_eval,
                                       exclude_times=op.jump_times)
    ctx.stage("limit_residual", limit <= slack, limit, slack,
              "integral identity of the last member against the original operator, "
              "jump frames excluded")
    oracle = make_oracle(cfg.oracle)
    if oracle is not None and cfg.oracle_tol is not None:
        fin = res.final
        last = Trajectory(fin.times[-1:], fin.frames[-1:], fin.radius, fin.h, fin.tau)
        err = _oracle_error(last, oracle, cfg.R_eval)
        ctx.stage("oracle_final", err <= cfg.oracle_tol, err, cfg.oracle_tol,
                  f"sup error at t=T on B(0,{cfg.R_eval:g}) for n={res.n_values[-1]:g}")


_RUNNERS = {
    "check-hypotheses": _run_check_hypotheses,
    "solve": _run_solve,
    "smoothing": _run_smoothing,
    "schauder": _run_schauder,
    "mollify-study": _run_mollify_study,
}


def run(cfg: ExperimentConfig, out=None, threads: Optional[int] = None) -> RunManifest:
    """Execute ``cfg`` into ``out`` (default ``cfg.out``) and return the manifest.

    Raises :class:`ConfigError` for invalid configs before anything is
    written.  Numerical failures become failed stages.
    """
    out = Path(out if out is not None else (cfg.out or f"runs/{cfg.kind}"))
    op = build_operator(cfg)
    try:
        for ref in [cfg.datum] + [p["datum"] for p in cfg.pairs if "datum" in p]:
            make_datum(ref)
        make_source(cfg.source)
        make_oracle(cfg.oracle)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    _prepare_dir(out)
    ctx = _Context(cfg, op, out, thread_count(threads))
    t0 = time.perf_counter()
    try:
        _RUNNERS[cfg.kind](ctx)
    except NUMERICAL_ERRORS as exc:
        ctx.stage(f"{cfg.kind}_error", False, detail=f"{type(exc).__name__}: {exc}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        ctx.stage(f"{cfg.kind}_error", False, detail=f"{type(exc).__name__}: {exc}")
    wall = time.perf_counter() - t0
    ctx.write("stages.csv", _csv([s.as_row() for s in ctx.stages], STAGE_COLUMNS))
    ctx.write("config.json", cfg.dumps() + "\n")
    outputs = []
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name not in (MANIFEST, IN_PROGRESS, MANIFEST + ".tmp"):
            rel = p.relative_to(out).as_posix()
            outputs.append({"path": rel, "sha256": _sha256(p), "bytes": p.stat().st_size})
    manifest = RunManifest(cfg.config_hash(), cfg.kind, versions(), round(wall, 3),
                           [s.as_row() for s in ctx.stages], outputs, cfg.to_json())
    _write_manifest(out, manifest)
    (out / IN_PROGRESS).unlink()
    return manifest


# ---------------------------------------------------------------------------
# reports


def verify_run(run_dir) -> RunManifest:
    """Load the manifest and check every listed output against its checksum."""
    run_dir = Path(run_dir)
    m = RunManifest.load(run_dir)
    bad = []
    for o in m.outputs:
        p = run_dir / o["path"]
        if not p.is_file():
            bad.append(f"missing {o['path']}")
        elif _sha256(p) != o["sha256"]:
            bad.append(f"checksum mismatch {o['path']}")
    if bad:
        raise ChecksumError(f"{run_dir}: " + "; ".join(bad))
    return m


def _read_csv(path: Path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _f(s):
    return float(s) if s not in ("", None) else float("nan")


def report(run_dir) -> list:
    """Render SVG plots and ``summary.txt`` into ``run_dir/report``; returns the written paths."""
    run_dir = Path(run_dir)
    m = verify_run(run_dir)
    rdir = run_dir / "report"
    rdir.mkdir(exist_ok=True)
    written = []
    if m.kind == "smoothing" and (run_dir / "smoothing.csv").exists():
        rows = _read_csv(run_dir / "smoothing.csv")
        pairs = {}
        for r in rows:
            pairs.setdefault((r["alpha"], r["beta"]), []).append(r)
        for (a, b), rs in sorted(pairs.items()):
            t = [_f(r["t_minus_s"]) for r in rs]
            n = [_f(r["norm"]) for r in rs]
            e, C = _f(rs[0]["fitted_exponent"]), _f(rs[0]["fitted_C"])
            series = [{"label": "measured", "x": t, "y": n},
                      {"label": f"fit exponent {e:.3f}", "x": t,
                       "y": [C * x ** (-e) for x in t], "dashed": True, "markers": False}]
            written.append(line_plot(rdir / f"smoothing_a{a}_b{b}.svg", series,
                                     title=f"C^{b} norm from C^{a} data", xlabel="t - s",
                                     ylabel="norm", logx=True, logy=True))
    if m.kind == "mollify-study" and (run_dir / "convergence.csv").exists():
        rows = _read_csv(run_dir / "convergence.csv")[1:]
        n = [_f(r["n"]) for r in rows]
        series = [{"label": lab, "x": n, "y": [_f(r[col]) for r in rows]}
                  for lab, col in (("sup", "increment_sup"), ("gradient", "increment_grad"),
                                   ("Hessian", "increment_hess"))]
        written.append(line_plot(rdir / "increments.svg", series,
                                 title="increments between mollified members", xlabel="n",
                                 ylabel="increment on the evaluation ball", logx=True,
                                 logy=True))
    if m.kind == "solve" and (run_dir / "solve_summary.csv").exists():
        rows = _read_csv(run_dir / "solve_summary.csv")
        t = [_f(r["time"]) for r in rows]
        series = [{"label": "sup norm", "x": t, "y": [_f(r["sup_norm"]) for r in rows]},
                  {"label": "exp(c0 t) sup f", "x": t, "y": [_f(r["sup_bound"]) for r in rows],
                   "dashed": True, "markers": False}]
        written.append(line_plot(rdir / "sup_norm.svg", series, title="sup norm of the solution",
                                 xlabel="t", ylabel="sup |u|"))
    lines = [f"kind: {m.kind}", f"status: {'pass' if m.passed else 'fail'}",
             f"config hash: {m.config_hash}", f"wall clock: {m.wall_clock_seconds:.1f} s",
             "versions: " + ", ".join(f"{k} {v}" for k, v in sorted(m.versions.items())),
             "", "stages:"]
    width = max((len(s["stage"]) for s in m.stages), default=5)
    for s in m.stages:
        thr = f" (threshold {s['threshold']})" if s["threshold"] else ""
        lines.append(f"  {s['stage']:<{width}}  {s['status'].upper():4}  {s['value']}{thr}"
                     f"  {s['detail']}")
    lines += ["", f"outputs: {len(m.outputs)} files, all checksums verified"]
    if written:
        lines += ["plots:"] + [f"  report/{p.name}" for p in written]
    summary = rdir / "summary.txt"
    summary.write_text("\n".join(lines) + "\n")
    return written + [summary]
