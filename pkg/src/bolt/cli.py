"""Command line entry point: ``bolt run | validate | report``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import BoltError


def _setup_logging():
    level = os.environ.get("BOLT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="bolt", description="Refit layered outfits to a new body.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an outfit manifest")
    r.add_argument("manifest", type=Path)
    r.add_argument("--out", type=Path, required=True, help="output directory")
    r.add_argument("--config", type=Path, help="JSON file of config overrides")
    r.add_argument("--frames", type=_nonneg, help="frames per layer (default 6)")
    r.add_argument("--threads", type=_positive, default=1, help="worker threads for per-garment jobs")
    r.add_argument("--emit-debug-sdf", action="store_true", help="dump collision SDFs")
    r.add_argument("--emit-frames", action="store_true", help="write an OBJ per simulated frame")
    r.add_argument("--seed", type=_u64, default=0, help="recorded in the report")
    v = sub.add_parser("validate", help="check a garment or body bundle")
    v.add_argument("bundle", type=Path)
    rep = sub.add_parser("report", help="print a run report as tables")
    rep.add_argument("run_dir", type=Path)
    return p


def _cmd_run(args):
    from .pipeline import run_pipeline

    overrides = None
    if args.config is not None:
        try:
            overrides = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
            return 2
    if args.threads > 1:
        try:
            import numba

            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        except Exception:  # thread count is advisory
            pass
    report = run_pipeline(args.manifest, args.out, overrides, args.frames, args.threads,
                          args.emit_debug_sdf, args.emit_frames, args.seed)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not report.ok:
        print(f"error: stage '{report.failed_stage}' failed"
              f"{'' if report.failed_garment is None else f' for {report.failed_garment}'}: "
              f"{report.error}", file=sys.stderr)
        return 1
    print(f"wrote {args.out} ({len(report.outputs)} garment(s), "
          f"{report.timings.get('total', 0.0):.1f} s)")
    return 0


def _cmd_validate(args):
    from .io import validate_bundle

    kind, summary = validate_bundle(args.bundle)
    print(f"{args.bundle}: valid {kind} bundle")
    for k, v in summary.items():
        print(f"  {k}: {v}")
    return 0


def _cmd_report(args):
    from .pipeline import format_report

    path = args.run_dir / "report.json"
    if not path.exists():
        print(f"error: {path} not found", file=sys.stderr)
        return 2
    print(format_report(json.loads(path.read_text())))
    return 0


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "validate": _cmd_validate, "report": _cmd_report}[args.command]
    try:
        return handler(args)
    except (BoltError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
