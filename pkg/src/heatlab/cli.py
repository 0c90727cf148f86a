"""Command-line entry point.

::

    heatlab run <config> [--out DIR] [--threads N] [--no-plots]
    heatlab plot <DIR>
    heatlab print-schema

``run`` exits with status 0 iff every check passed, 1 if some check failed
and 2 on invalid usage or an invalid config. ``HEATLAB_CACHE`` names a
directory for the binary propagator cache.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import parse_config, schema_text
from .errors import ConfigError, HeatlabError
from .plots import emit_plots
from .runner import REPORT_FILE, run, write_outputs

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heatlab", description="Lattice heat-kernel bound experiments.")
    p.add_argument("--version", action="version", version=f"heatlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute the scenario of a config file")
    r.add_argument("config", help="path to an INI config (see print-schema)")
    r.add_argument("--out", default=None, help="output directory (default: <config stem>_out)")
    r.add_argument("--threads", type=int, default=1, help="worker cap (0 = all cores); results do not change")
    r.add_argument("--no-plots", action="store_true", help="skip SVG rendering")
    pl = sub.add_parser("plot", help="render profiles/*.csv of a run directory to plots/*.svg")
    pl.add_argument("dir")
    sub.add_parser("print-schema", help="print the config schema")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "print-schema":
        sys.stdout.write(schema_text())
        return EXIT_PASS
    if args.command == "plot":
        try:
            paths = emit_plots(args.dir)
        except HeatlabError as e:
            print(f"heatlab plot: {e}", file=sys.stderr)
            return EXIT_USAGE
        for path in paths:
            print(path)
        return EXIT_PASS
    if args.threads < 0:
        print("heatlab run: --threads must be >= 0", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = parse_config(Path(args.config))
    except ConfigError as e:
        print(f"heatlab run: {args.config}: {e}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out) if args.out else Path(args.config).with_name(Path(args.config).stem + "_out")
    try:
        report = run(cfg, threads=args.threads)
    except HeatlabError as e:
        print(f"heatlab run: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE
    write_outputs(report, out, plots=not args.no_plots)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}  {len(report.records)} checks, {len(report.failures)} failed  -> {out / REPORT_FILE}")
    for f in report.failures:
        print(f"  failed: {f['scenario']}/{f['check']}: {f['reason']}")
    return report.exit_status


if __name__ == "__main__":
    sys.exit(main())
