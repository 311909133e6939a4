"""
Command Line Application Module

This module defines the argument parser and the entry point for the
trajectory-grid simulator. Sub-commands are dispatched to cli.commands.

Exit codes:
    0  run completed (or a non-simulating command succeeded)
    1  I/O error
    2  usage or configuration error
    3  run ended with a trajectory crossing
    4  run failed numerically
"""

import argparse
import logging
import sys
from typing import List, Optional

from cli import commands
from cli.commands import EXIT_COMPLETED, EXIT_USAGE
from models.config import GridKind
from models.fitting import Estimator

logger = logging.getLogger(__name__)


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stdout)],
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bohmgrid",
        description="Co-moving Bohmian grid simulator for 1-D wave packets.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run a simulation from a config file")
    simulate.add_argument("--config", required=True, help="config path or bundled name (paper_polyfit, paper_lsq)")
    simulate.add_argument("--output", help="output directory (overrides [output] directory)")
    simulate.add_argument("--snapshot-every", type=int, help="snapshot stride in steps")
    simulate.add_argument(
        "--method",
        choices=[e.value for e in Estimator],
        help="override the estimator of both fit policies",
    )
    simulate.set_defaults(handler=commands.simulate)

    fields = sub.add_parser("fields", help="write fitted density/velocity fields of a finished run")
    fields.add_argument("--record", required=True, help="output directory of a simulate run")
    fields.add_argument("--times", required=True, help="comma separated snapshot times")
    fields.set_defaults(handler=commands.fields)

    init_grid = sub.add_parser("init-grid", help="write the initial grid state")
    init_grid.add_argument("--config", required=True, help="config path or bundled name")
    init_grid.add_argument("--kind", required=True, choices=[k.value for k in GridKind])
    init_grid.add_argument("--out", required=True, help="CSV file to write")
    init_grid.set_defaults(handler=commands.init_grid)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run the chosen command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_COMPLETED if e.code == 0 else EXIT_USAGE
    configure_logging(args.verbose)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
