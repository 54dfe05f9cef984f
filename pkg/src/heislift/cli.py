"""Command line entry point: ``heislift run|check --config <path>``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config, validate_inputs
from .errors import ConstructionError, UnsupportedFill

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_CONFIG = 2
EXIT_UNSUPPORTED_FILL = 3
EXIT_CONSTRUCTION = 4


def _jobs(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("HEISLIFT_JOBS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _fail(module: str, message: str, code: int) -> int:
    print(f"heislift: {module}: {message}", file=sys.stderr)
    return code


def cmd_check(args) -> int:
    try:
        cfg = load_config(args.config)
        violations = validate_inputs(cfg)
    except ConfigError as exc:
        report = {"ok": False, "violations": exc.violations, "warnings": []}
        print(json.dumps(report, indent=1, sort_keys=True))
        return EXIT_CONFIG
    except UnsupportedFill as exc:
        return _fail("targets", str(exc), EXIT_UNSUPPORTED_FILL)
    report = {"ok": not violations, "violations": violations, "warnings": cfg.warnings}
    print(json.dumps(report, indent=1, sort_keys=True))
    return EXIT_OK if not violations else EXIT_CONFIG


def cmd_run(args) -> int:
    from . import pipeline

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.analysis.seed = args.seed
        if args.out is not None:
            cfg.output = Path(args.out)
        built = pipeline.build(cfg)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    except UnsupportedFill as exc:
        return _fail("extend", str(exc), EXIT_UNSUPPORTED_FILL)
    except ConstructionError as exc:
        return _fail("triangulate", str(exc), EXIT_CONSTRUCTION)
    for w in cfg.warnings:
        print(f"heislift: warning: {w}", file=sys.stderr)
    checks, reports = pipeline.run_analysis(cfg, built, jobs=_jobs(args.jobs))
    summary = pipeline.write_bundle(cfg.output, cfg, built, checks, reports, cfg.to_json())
    for name, c in summary["checks"].items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}")
    return EXIT_OK if summary["passed"] else EXIT_CHECKS_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heislift", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (
        ("run", cmd_run, "build the extension and run the analysis suites"),
        ("check", cmd_check, "validate a config and its inputs without building"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override analysis.seed")
        p.add_argument("--jobs", type=int, help="worker threads (default: $HEISLIFT_JOBS or 1)")
        p.add_argument("--out", help="override the output directory")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
