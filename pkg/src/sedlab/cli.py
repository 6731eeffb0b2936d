"""Command-line entry point: ``sedlab <experiment> [options]``."""

from __future__ import annotations

import argparse
import sys

from .config import EXPERIMENTS, ConfigError, describe_keys, parse_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sedlab",
        description="Stochastic electrodynamics experiments in atomic units.",
        epilog="configuration keys (config file lines or --set key=value):\n" + describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", metavar="FILE", help="key = value config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key (repeatable)")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--workers", type=int, help="worker processes")
    parser.add_argument("--allow-recurrence", action="store_true",
                        help="permit t_end beyond the field recurrence time")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {"out_dir": args.out, "seed": args.seed, "workers": args.workers}
    if args.allow_recurrence:
        flags["allow_recurrence"] = "on"
    try:
        config = parse_config(args.experiment, args.config, args.overrides, **flags)
    except ConfigError as exc:
        print(f"sedlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from .harness import fmt, nearfield_rows, run_experiment

    try:
        if config.experiment == "nearfield":
            for term, x, y, z in nearfield_rows(config):
                print(",".join([term] + [fmt(c) for c in (x, y, z)]))
        record = run_experiment(config)
    except ConfigError as exc:
        print(f"sedlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # reported, not traced, at the command line
        print(f"sedlab: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    print(f"wrote {record.out_dir} ({record.wall_clock:.1f} s)", file=sys.stderr)
    if config.experiment != "nearfield":
        for key, value in record.report.items():
            print(f"{key} = {fmt(value)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
