"""Command-line entry point: ``llfvem <experiment> [--config PATH] [--out DIR] [--seed N]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import EXPERIMENTS, ConfigError, build_config, load_config_file
from .harness import run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llfvem", description="FVEM + Gauss-Seidel projection LL solver")
    sub = parser.add_subparsers(dest="experiment", metavar="EXPERIMENT", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", type=Path, help="flat key=value configuration file")
        p.add_argument("--out", type=Path, help="output directory (default: config 'out' or ./results)")
        p.add_argument("--seed", type=int, help="seed for randomized initial data")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    return parser


def _print_summary(art) -> None:
    for key, value in art.summary.items():
        if isinstance(value, np.ndarray):
            continue
        print(f"{key}: {value}")
    for path in art.files:
        if not str(path).endswith(".vtk"):
            print(f"wrote {path}")
    if art.snapshots:
        print(f"wrote {len(art.snapshots)} VTK snapshot(s)")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        values = load_config_file(args.config) if args.config else {}
        cfg = build_config(args.experiment, values, seed=args.seed, out=str(args.out) if args.out else None)
        out_dir = Path(cfg.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        art = run(cfg, out_dir)
    except ConfigError as exc:
        print(f"llfvem: configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"llfvem: {args.experiment} failed: {exc}", file=sys.stderr)
        return 1
    _print_summary(art)
    return 0


if __name__ == "__main__":
    sys.exit(main())
