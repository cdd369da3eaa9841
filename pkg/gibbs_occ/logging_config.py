import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from gibbs_occ.config import Settings, get_settings

FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
CONSOLE_FORMAT = "%(levelname)s - %(message)s"
QUIET_LOGGERS = ("httpx", "httpcore", "uvicorn.access")

_console: Optional[logging.Handler] = None


def _file_handler(settings: Settings) -> RotatingFileHandler:
    path = Path(settings.log_file)
    path.parent.mkdir(exist_ok=True, parents=True)
    handler = RotatingFileHandler(
        path,
        maxBytes=settings.log_max_mb * 1024 * 1024,
        backupCount=settings.log_backups,
        encoding="utf-8",
    )
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(logging.Formatter(fmt=FILE_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"))
    return handler


def setup_logging(level: Optional[str] = None) -> None:
    """Attach the rotating file and stderr handlers to the root logger.

    The handlers are installed once per process. Later calls only retune the
    console level, so ``serve`` and CLI subcommands can share one setup.
    """
    global _console
    settings = get_settings()
    console_level = getattr(logging, (level or settings.log_level).upper())
    if _console is not None:
        _console.setLevel(console_level)
        return

    # stdout carries CLI tables
    _console = logging.StreamHandler(sys.stderr)
    _console.setLevel(console_level)
    _console.setFormatter(logging.Formatter(fmt=CONSOLE_FORMAT))

    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    root.addHandler(_file_handler(settings))
    root.addHandler(_console)
    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    logging.getLogger(__name__).debug(
        f"logging to {settings.log_file} (rotate at {settings.log_max_mb} MB, keep {settings.log_backups})"
    )
