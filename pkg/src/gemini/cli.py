"""``gemini run|sweep|figures <config>`` command line."""

from __future__ import annotations

import argparse
import os
import sys

from .config import BoundaryMIExperiment, ConfigError, load_config
from .experiments import SUMMARY_HEADER, run_boundary_mi, run_clustering, run_figures
from .training import TrainingDiverged

EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gemini", description="GEMINI clustering experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "train every objective of a config and write per-seed reports"),
        ("sweep", "like run, and also write the aggregate summary table"),
        ("figures", "write plot-ready CSV grids and curves"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="experiment config (JSON)")
        p.add_argument("--outdir", default=None, help="output directory (default $GEMINI_OUTDIR or ./results)")
        p.add_argument("--seed", type=int, action="append", default=None, help="seed to run; repeatable")
        p.add_argument("--threads", type=int, default=1, help="concurrent seed jobs")
    return parser


def _print_table(rows) -> None:
    print("\t".join(SUMMARY_HEADER))
    for r in rows:
        print("\t".join(f"{v:.4f}" if isinstance(v, float) else str(v) for v in r))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    outdir = args.outdir or os.environ.get("GEMINI_OUTDIR") or "results"
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid config {args.config}:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "figures":
            for path in run_figures(cfg, outdir, args.seed):
                print(path)
        elif isinstance(cfg, BoundaryMIExperiment):
            rows = run_boundary_mi(cfg, outdir, args.seed)
            print("gap\tdelta_closed\tdelta_limit\tdelta_mc_median")
            for r in rows:
                print(f"{r[0]:g}\t{r[2]:.6f}\t{r[3]:.6f}\t{r[10]:.6f}")
        else:
            _, rows = run_clustering(cfg, outdir, args.seed, args.threads, write_summary=True)
            _print_table(rows)
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValueError, FileNotFoundError) as exc:
        print(f"invalid config {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
