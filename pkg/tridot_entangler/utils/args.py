"""Parse CLI arguments."""

from __future__ import annotations

from argparse import ArgumentParser, Namespace
from logging import Logger, getLevelNamesMapping
from os import getenv
from pathlib import Path
from typing import TYPE_CHECKING, Literal

from wg_utilities.loggers import add_stream_handler

from . import const

if TYPE_CHECKING:
    from collections.abc import Sequence

LOG_LEVEL: Literal[10, 20, 30, 40, 50] = getLevelNamesMapping()[  # type: ignore[assignment]
    getenv("TRIDOT_LOG_LEVEL", "WARNING").upper()
]

SUBCOMMANDS = ("scan-suppression", "trajectory", "rates", "steady", "validate")


def _seed(value: str) -> int:
    seed = int(value, 0)
    if not 0 <= seed < 2**64:
        raise ValueError(value)

    return seed


def build_parser() -> ArgumentParser:
    """Build the `tridot` parser with one subparser per experiment."""
    common = ArgumentParser(add_help=False)

    source = common.add_mutually_exclusive_group()
    source.add_argument(
        "-c",
        "--config",
        type=Path,
        default=None,
        help="Path to a YAML run configuration.",
    )
    source.add_argument(
        "-p",
        "--preset",
        default=None,
        help="Name of a bundled preset (clean, dirty, suppression, validation).",
    )

    common.add_argument(
        "-s",
        "--seed",
        type=_seed,
        default=None,
        help="Unsigned 64-bit seed; drawn from entropy and logged when omitted.",
    )
    common.add_argument(
        "-o",
        "--out",
        type=Path,
        default=None,
        help="Output CSV path (or directory for `rates`); stdout when omitted.",
    )
    common.add_argument(
        "--units",
        type=const.Units,
        choices=list(const.Units),
        default=const.Units.NATURAL,
        help="Display units for times and rates.",
    )
    common.add_argument(
        "-n",
        "--n-traj",
        type=int,
        default=None,
        help="Number of trajectories for empirical overlays and ensemble checks.",
    )
    common.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Increase verbosity level. Use -v for INFO and -vv for DEBUG.",
    )

    parser = ArgumentParser(prog="tridot", description="Three-dot entangler simulator")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name in SUBCOMMANDS:
        subparsers.add_parser(name, parents=[common])

    return parser


def parse_arguments(argv: Sequence[str] | None = None) -> Namespace:
    """Parse arguments for the simulator and configure package logging."""
    global LOG_LEVEL  # noqa: PLW0603

    args = build_parser().parse_args(argv)

    if args.verbose == 1:
        LOG_LEVEL = 20
    elif args.verbose > 1:
        LOG_LEVEL = 10

    for k, v in Logger.manager.loggerDict.items():
        if k.startswith("tridot_entangler") and isinstance(v, Logger):
            v.setLevel(LOG_LEVEL)
            if not v.handlers:
                add_stream_handler(v, level=LOG_LEVEL)

    return args


__all__ = ["LOG_LEVEL", "SUBCOMMANDS", "build_parser", "parse_arguments"]
