"""Command line front end: ``schauder-lab <kind> (--config PATH | --preset NAME) [options]``.

Exit status is 0 when every stage assertion passed, 1 when a numerical
stage failed (or a report found missing or altered outputs) and 2 for
invalid configs or arguments.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (KINDS, ChecksumError, ConfigError, ExperimentConfig, load_config,
                          report, run)
from .presets import preset_config, preset_names


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schauder-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="experiment config (JSON)")
        src.add_argument("--preset", choices=preset_names(), help="bundled preset")
        p.add_argument("--out", help="run directory (default: config value or runs/<kind>)")
        p.add_argument("--seed", type=int, help="seed for sampled Hölder quotients")
        p.add_argument("--threads", type=int,
                       help="worker threads for sweeps (default: $SCHAUDER_LAB_THREADS or 1)")
        p.add_argument("--scheme", choices=("backward_euler", "crank_nicolson"))
        p.add_argument("--radius-ladder", type=_floats, help="e.g. 8,16,32")
        p.add_argument("--tol", type=float, help="expanding-ball agreement tolerance")
        p.add_argument("--mesh-h", type=float, help="mesh width")
        p.add_argument("--tau", type=float, help="time step")
        p.add_argument("--theta", type=float, help="Hölder exponent for schauder runs")
        p.add_argument("--print-config", action="store_true",
                       help="print the resolved config and exit")
    r = sub.add_parser("report", help="render plots and a summary for a finished run")
    r.add_argument("run_dir")
    sub.add_parser("presets", help="list bundled presets")
    return parser


def _resolve(args) -> ExperimentConfig:
    overrides = {}
    for attr, key in (("seed", "seed"), ("scheme", "scheme"), ("radius_ladder", "radii"),
                      ("tol", "tol"), ("mesh_h", "h"), ("tau", "tau"), ("theta", "theta"),
                      ("out", "out")):
        v = getattr(args, attr)
        if v is not None:
            overrides[key] = v
    if args.preset:
        return preset_config(args.preset, args.kind, **overrides)
    cfg = load_config(args.config)
    if cfg.kind != args.kind:
        raise ConfigError(f"config is for kind {cfg.kind!r}, not {args.kind!r}")
    if overrides:
        body = cfg.to_json()
        body.update(overrides)
        cfg = ExperimentConfig.from_json(body)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.kind == "presets":
        from .presets import PRESETS

        for name in preset_names():
            print(f"{name:26} {PRESETS[name]['description']}")
        return 0
    if args.kind == "report":
        try:
            paths = report(args.run_dir)
        except ChecksumError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print((paths[-1]).read_text(), end="")
        return 0
    try:
        cfg = _resolve(args)
        if args.print_config:
            print(cfg.dumps())
            return 0
        manifest = run(cfg, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for s in manifest.stages:
        print(f"{s['status'].upper():4}  {s['stage']}  {s['value']}  {s['detail']}")
    out = cfg.out or f"runs/{cfg.kind}"
    print(f"run directory: {out}  status: {'pass' if manifest.passed else 'fail'}")
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
