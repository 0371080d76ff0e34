"""Command-line entry point: ``rydkick <command> --config PATH``."""

import argparse
import logging
import sys

from .config import load_config
from .errors import ConfigError, RydkickError
from .pipeline import COMMANDS, run_command

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rydkick",
        description="Simulate HCP-kicked Rydberg wave packets and their covariance readout.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument(
        "--config", default=None,
        help="YAML scenario file (default: the shipped default scenario)",
    )
    parser.add_argument("--seed", type=int, default=None, help="override scan.seed")
    parser.add_argument("--out", default=None, help="override output.directory")
    parser.add_argument(
        "--strict", action="store_true",
        help="fail (exit 3) when the kick exceeds the unitarity tolerance",
    )
    parser.add_argument("--ensemble", default=None, help="ensemble CSV for 'analyze'")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config)
        files = run_command(
            args.command, config, out_dir=args.out, seed=args.seed,
            strict=args.strict, ensemble=args.ensemble,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RydkickError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for path in files:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
