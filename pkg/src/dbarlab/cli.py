"""Command line entry point: ``dbarlab run <config.yaml>``.

Exit status: 0 when every check passes, 2 when a threshold check fails,
1 on configuration, input or I/O errors.
"""

import argparse
import datetime
import logging
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .config import load_config
from .errors import DbarLabError
from .report import emit_report
from .scenarios import run_scenario

log = logging.getLogger("dbarlab")


def build_parser():
    ap = argparse.ArgumentParser(prog="dbarlab", description="Homotopy-operator experiments.")
    ap.add_argument("--version", action="version", version=f"dbarlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one scenario config")
    run.add_argument("config", help="YAML scenario file")
    run.add_argument("--override", "-o", action="append", default=[], metavar="KEY=VALUE",
                     help="dotted override, value parsed as YAML (repeatable)")
    run.add_argument("--out-dir", default=".", help="directory for the CSV, JSON and plot files")
    run.add_argument("--threads", type=int, help="worker threads (overrides the config)")
    run.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    run.add_argument("--verbose", "-v", action="store_true")
    return ap


def _summary(cfg, result, wall):
    return {
        "scenario": cfg.scenario,
        "passed": result.passed,
        "checks": [c.as_dict() for c in result.checks],
        "config": cfg.data,
        "extra": result.extra,
        "records": len(result.records),
        "wall_time_s": wall,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "environment": {"python": platform.python_version(), "numpy": np.__version__,
                        "dbarlab": __version__},
    }


def cmd_run(args):
    overrides = list(args.override)
    if args.threads is not None:
        overrides.append(f"threads={args.threads}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    cfg = load_config(args.config, overrides)
    t0 = time.perf_counter()
    result = run_scenario(cfg)
    wall = time.perf_counter() - t0
    out = cfg["output"]
    paths = {k: os.path.join(args.out_dir, out[k]) for k in ("csv", "json", "plot")}
    emit_report(result.records, _summary(cfg, result, wall), paths, result.series)
    for c in result.checks:
        mark = "PASS" if c.passed else "FAIL"
        print(f"{mark} {c.name}: {c.measured!r} {c.comparator} {c.threshold!r}")
    print(f"wrote {paths['csv']}, {paths['json']}, {paths['plot']}")
    return 0 if result.passed else 2


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return cmd_run(args)
    except (DbarLabError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
