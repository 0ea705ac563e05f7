import argparse
import logging
import sys

import helpers.env_config  # noqa: F401
from helpers.errors import EXIT_OK, ZachVitError
from helpers.logging import MAIN_LOGGER_NAME
from helpers.sentry import init_sentry
from helpers.version import TOOL_VERSION
from tools import register_commands

logger = logging.getLogger(MAIN_LOGGER_NAME)

_INTERNAL_ARGS = ("command", "handler")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zachvit",
        description=(
            "ZACH-ViT with ShuffleStrides Data Augmentation: synthetic data, "
            "augmentation, training, evaluation and verification."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {TOOL_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    register_commands(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    init_sentry()
    args = build_parser().parse_args(argv)
    kwargs = {k: v for k, v in vars(args).items() if k not in _INTERNAL_ARGS}
    try:
        output = args.handler(**kwargs)
    except ZachVitError as exc:
        logger.error(f"{args.command} failed: {exc}")
        return exc.exit_code
    print(output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
