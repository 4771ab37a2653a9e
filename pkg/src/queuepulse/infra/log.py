import logging
import sys
from pathlib import Path
from typing import Any, Mapping, Optional

from loguru import logger

from queuepulse.config import settings

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
    "<level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function}:{line} - {message}"

# stdlib loggers that reach us: Python/numpy warnings and the replication pool
INTERCEPTED = ("py.warnings", "concurrent.futures")


class InterceptHandler(logging.Handler):
    """Forwards standard ``logging`` records to loguru, keeping the original caller."""

    def emit(self, record: logging.LogRecord):
        try:
            level = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno

        frame, depth = logging.currentframe(), 2
        while frame and frame.f_code.co_filename == logging.__file__:
            frame = frame.f_back
            depth += 1

        logger.opt(depth=depth, exception=record.exc_info).log(level, record.getMessage())


def _add_file_sinks(log_dir: Path, level: str, cfg: Mapping[str, Any]) -> None:
    log_dir.mkdir(parents=True, exist_ok=True)
    common = dict(format=FILE_FORMAT, compression="zip", encoding="utf-8")
    logger.add(log_dir / "queuepulse.log", level=level,
               rotation=cfg.get("rotation", "500 MB"), retention=cfg.get("retention", "10 days"), **common)
    logger.add(log_dir / "error.log", level="ERROR", rotation="100 MB", retention="30 days", **common)


def setup_logging(level: Optional[str] = None):
    """
    Configure loguru from the ``logging`` settings section.

    :param level: Console level override; the CLI passes WARNING for ``--quiet``.
        File sinks keep the configured level so a quiet run still leaves a full log.
    """
    cfg = settings.get("LOGGING", {})
    file_level = cfg.get("level", "INFO").upper()
    console_level = (level or file_level).upper()
    save_to_file = cfg.get("save_to_file", False)

    logger.remove()
    logger.add(sys.stderr, level=console_level, format=CONSOLE_FORMAT, colorize=True)
    if save_to_file:
        _add_file_sinks(Path(cfg.get("log_dir", "logs")), file_level, cfg)

    # RuntimeWarnings from numpy reductions arrive through the warnings module
    logging.captureWarnings(True)
    logging.basicConfig(handlers=[InterceptHandler()], level=0, force=True)
    for name in INTERCEPTED:
        std_logger = logging.getLogger(name)
        std_logger.handlers = [InterceptHandler()]
        std_logger.propagate = False

    logger.debug(f"Logging initialized. Console: {console_level}, file: {file_level if save_to_file else 'off'}")


# Export for convenience
log = logger
