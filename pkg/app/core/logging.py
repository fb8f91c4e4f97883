"""
Logging configuration for deintensify.
"""
import logging
import os
import sys


def setup_logging(level: int | None = None) -> None:
    """Configure application-wide logging for deintensify.

    Sets a consistent format on the root 'app' logger and quiets the
    numerical libraries' own loggers down to WARNING so they don't
    drown out calibration and simulation output. When no level is
    given, DEINTENSIFY_LOG_LEVEL decides (default INFO).
    """
    if level is None:
        name = os.getenv("DEINTENSIFY_LOG_LEVEL", "INFO").upper()
        level = logging.getLevelName(name)
        if not isinstance(level, int):
            level = logging.INFO

    fmt = "%(asctime)s  %(levelname)-8s  %(name)s  %(message)s"
    datefmt = "%Y-%m-%d %H:%M:%S"

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(fmt, datefmt=datefmt))

    app_logger = logging.getLogger("app")
    app_logger.setLevel(level)
    if not app_logger.handlers:
        app_logger.addHandler(handler)

    # numexpr announces its thread count at INFO on import of pandas
    logging.getLogger("numexpr").setLevel(logging.WARNING)
    logging.getLogger("numexpr.utils").setLevel(logging.WARNING)
