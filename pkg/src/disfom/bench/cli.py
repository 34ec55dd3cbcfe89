"""Command-line entry point.

Subcommands: sweep, race, plotdata, validate-config.  Exit codes: 0 on
success, 1 on configuration errors, 2 when individual runs failed.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config, validate_config
from .runner import emit_plot_data, run_dimension_sweep, run_timing_race


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disfom-bench",
        description="Reproducible benchmark harness for the prox-based "
        "stochastic first-order methods.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, need_out=True):
        p.add_argument("--config", default=None, help="INI config file (defaults apply)")
        if need_out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=None, help="parallel workers")
        p.add_argument("--seed", type=int, default=None, help="override base seed")

    add_common(sub.add_parser("sweep", help="dimension sweep over all methods"))
    add_common(sub.add_parser("race", help="subproblem timing race vs ADMM"))
    plot = sub.add_parser("plotdata", help="derive plot-ready CSVs from results")
    plot.add_argument("--out", required=True, help="directory holding the results")
    val = sub.add_parser("validate-config", help="parse and validate a config")
    val.add_argument("--config", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "plotdata":
            written = emit_plot_data(args.out)
            for path in written:
                print(path)
            return 0
        cfg = load_config(args.config)
        if getattr(args, "seed", None) is not None:
            cfg.base_seed = args.seed
        if getattr(args, "workers", None) is not None:
            cfg.workers = args.workers
        if args.command == "validate-config":
            errs = validate_config(cfg)
            for err in errs:
                print(f"error: {err}", file=sys.stderr)
            print("config ok" if not errs else f"{len(errs)} problem(s)")
            return 0 if not errs else 1
        if args.command == "sweep":
            failures = run_dimension_sweep(cfg, args.out)
        elif args.command == "race":
            # Timing comparisons need a quiet machine: single worker always.
            failures = run_timing_race(cfg, args.out)
        else:  # pragma: no cover
            raise AssertionError(args.command)
        for failure in failures:
            print(f"failed: {failure}", file=sys.stderr)
        return 2 if failures else 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
