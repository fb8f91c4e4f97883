"""
Command-line entry point for deintensify.
Handles environment loading, logging setup, subcommand dispatch and exit codes.
"""
import argparse
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv

from app import __version__
from app.commands import EXIT_FAILURE, EXIT_INVALID, design, montecarlo
from app.core.betastacy import AcceptanceRateError
from app.core.logging import setup_logging
from app.core.models import DesignValidationError, MissingCalibrationError
from app.core.store import CalibrationMismatchError, DataFileError
from app.core.survival import TargetUnreachableError

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deintensify",
        description="Design, calibrate and simulate sequential de-intensification trials.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    subparsers = parser.add_subparsers(dest="command", required=True)
    design.register(subparsers)
    montecarlo.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point for the CLI."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    setup_logging(logging.DEBUG if args.verbose else None)

    try:
        return args.handler(args)
    except DesignValidationError as e:
        for violation in e.violations:
            logger.error("%s", violation)
        return EXIT_INVALID
    except (
        DataFileError,
        CalibrationMismatchError,
        MissingCalibrationError,
        TargetUnreachableError,
    ) as e:
        logger.error("%s", e)
        return EXIT_INVALID
    except AcceptanceRateError as e:
        logger.error("Monotone posterior sampling failed: %s", e)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        logger.info("Received shutdown signal")
        return EXIT_FAILURE
    except Exception as e:
        logger.critical("Fatal error: %s", e, exc_info=True)
        raise


if __name__ == "__main__":
    sys.exit(main())
