"""Application entry point.

Loads the environment Config, sets up logging (stderr plus a rotating file under
<home>/logs), then hands the arguments to the CLI and returns its exit code.
"""

import logging
import sys
from collections.abc import Sequence

from loguru import logger

from .interface.cli import run
from .models import config as config_module
from .models.config import Config, get_config, load_config

LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"
STDERR_FORMAT = "<level>{level: <8}</level> | {message}"


def setup_logging(cfg: Config, verbose: bool = False) -> None:
    """Configure loguru sinks once per process."""
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO", format=STDERR_FORMAT)
    log_file = cfg.logs_dir / "kwsfcm.log"
    logger.add(log_file, rotation="10 MB", retention="7 days", level="DEBUG", format=LOG_FORMAT)
    # Route stdlib logging (e.g. Pillow) to loguru
    logging.basicConfig(handlers=[InterceptHandler()], level=logging.WARNING, force=True)
    logger.debug(f"home: {cfg.home}, threads: {cfg.threads}")
    logger.debug(f"Logging to file: {log_file}")


def main(argv: Sequence[str] | None = None) -> int:
    """Main entry point for kwsfcm."""
    args = list(sys.argv[1:] if argv is None else argv)
    if config_module.CONFIG is None:
        config_module.CONFIG = load_config(args)
    setup_logging(get_config(), verbose="-v" in args or "--verbose" in args)
    return run(args)


class InterceptHandler(logging.Handler):
    """Route stdlib logging records to loguru."""

    def emit(self, record: logging.LogRecord) -> None:
        logger.opt(depth=6, exception=record.exc_info).log(record.levelname, record.getMessage())


if __name__ == "__main__":
    sys.exit(main())
