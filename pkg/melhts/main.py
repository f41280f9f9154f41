# melhts/main.py

import argparse
import sys
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Type

from melhts.commands import COMMAND_MODULES
from melhts.config import EXIT_DATA_ERROR, EXIT_IO_ERROR, load_config, logger, setup_logging
from melhts.exceptions import ConfigError, DataError, MelHtsError, StorageError


# ---------------------------
# ARGUMENT PARSING
# ---------------------------

def add_common_arguments(parser: argparse.ArgumentParser, nested: bool = False) -> None:
    """
    --config, --set and --log-level. On a subcommand they default to
    SUPPRESS so a value given before the subcommand survives, and its
    --set flags collect apart to be appended after the global ones.
    """
    default = argparse.SUPPRESS if nested else None
    parser.add_argument("--config", type=Path, default=default,
                        help="Pipeline config file (section.key=value lines).")
    parser.add_argument("--set", dest="command_overrides" if nested else "overrides", action="append",
                        default=argparse.SUPPRESS if nested else [], metavar="SECTION.KEY=VALUE",
                        help="Override one config value; repeatable.")
    parser.add_argument("--log-level", default=default,
                        help="DEBUG, INFO, WARNING or ERROR (default MELHTS_LOG_LEVEL).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="melhts", description="Hybrid HMM mel-spectrogram TTS toolkit.")
    add_common_arguments(parser)
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for module in COMMAND_MODULES:
        module.register(subparsers)
    # the options are accepted on either side of the subcommand
    for command_parser in subparsers.choices.values():
        add_common_arguments(command_parser, nested=True)
    return parser


def parse_arguments(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    args = build_parser().parse_args(argv)
    args.overrides = list(args.overrides) + list(getattr(args, "command_overrides", []))
    return args


# ---------------------------
# GLOBAL ERROR HANDLERS
# ---------------------------

def config_error_handler(exc: ConfigError) -> int:
    logger.error(f"event=config_error detail={exc}")
    return exc.exit_code


def storage_error_handler(exc: StorageError) -> int:
    logger.error(f"event=io_error error={type(exc).__name__} detail={exc}")
    return exc.exit_code


def data_error_handler(exc: MelHtsError) -> int:
    logger.error(f"event=data_error error={type(exc).__name__} detail={exc}")
    return exc.exit_code


def os_error_handler(exc: OSError) -> int:
    logger.error(f"event=io_error error={type(exc).__name__} detail={exc}")
    return EXIT_IO_ERROR


def unexpected_error_handler(exc: Exception) -> int:
    logger.exception(f"event=unexpected_error error={type(exc).__name__} detail={exc}")
    return EXIT_DATA_ERROR


# First matching class wins.
EXCEPTION_HANDLERS: List[Tuple[Type[BaseException], Callable[..., int]]] = [
    (ConfigError, config_error_handler),
    (StorageError, storage_error_handler),
    (DataError, data_error_handler),
    (MelHtsError, data_error_handler),
    (OSError, os_error_handler),
    (Exception, unexpected_error_handler),
]


def handle_exception(exc: Exception) -> int:
    for exc_type, handler in EXCEPTION_HANDLERS:
        if isinstance(exc, exc_type):
            return handler(exc)
    raise exc


# ---------------------------
# ENTRY POINT
# ---------------------------

def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_arguments(argv)
    # A malformed command line has already exited inside argparse.
    try:
        setup_logging(args.log_level)
        config = load_config(args.config, args.overrides)
        # The file handler can only be attached once the config names it.
        if config.runtime.log_file is not None:
            setup_logging(args.log_level, config.runtime.log_file)
        logger.info(f"event=command_start command={args.command} workers={config.runtime.workers}")
        # Each subcommand registered its run function through set_defaults(func=...).
        code = args.func(args, config)
        logger.info(f"event=command_done command={args.command} exit_code={code}")
        return code
    except Exception as exc:
        return handle_exception(exc)


if __name__ == "__main__":
    sys.exit(main())
