"""Command-line entry point.

    flowlab run <benchmark> --config <file> --out <dir> [--method <m>]
    flowlab verify --all [--out <dir>]

Exit code 0 only when every enabled acceptance check passes.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import benchmarks
from .config import defaults_for, echo_config, load_config
from .reports import write_csv, write_report

_BENCHMARKS = ("static_drop", "rising_bubble", "sloshing_tank",
               "method_verification")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="flowlab",
        description="deforming-domain flow benchmarks and method checks")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one benchmark")
    run.add_argument("benchmark", choices=_BENCHMARKS)
    run.add_argument("--config", default=None, help="flat key=value file")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--method", default=None,
                     help="interface method override")

    verify = sub.add_parser("verify", help="run method property suites")
    verify.add_argument("--all", action="store_true", dest="all_methods",
                        help="verify every interface method")
    verify.add_argument("--method", default=None)
    verify.add_argument("--out", default=None)
    return parser


def _emit(cfg, report, out_dir):
    text = echo_config(cfg)
    write_report(out_dir, report, text)
    segs = getattr(report, "interface", None)
    if segs is not None and len(segs):
        rows = [[s[0][0], s[0][1], s[1][0], s[1][1]] for s in segs]
        write_csv(os.path.join(out_dir, "interface_segments.csv"),
                  ["x_start", "y_start", "x_end", "y_end"], rows)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        cfg = defaults_for(args.benchmark, method=args.method)
        if args.config:
            cfg = load_config(args.config, base=cfg)
        if args.method:
            cfg.method = args.method
        if args.out:
            cfg.out_dir = args.out
        report = benchmarks.run_benchmark(cfg)
        _emit(cfg, report, cfg.out_dir)
        print(report.table())
        return 0 if report.passed else 1

    # verify
    method = "all" if args.all_methods or not args.method else args.method
    cfg = defaults_for("method_verification", method=method)
    if args.out:
        cfg.out_dir = args.out
    report = benchmarks.run_method_verification(cfg)
    if args.out:
        _emit(cfg, report, cfg.out_dir)
    print(report.table())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
