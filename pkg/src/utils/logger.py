"""
Logger Utility

One setup function shared by the stages, the trainer and the CLI.

LOG_FORMAT selects the line format:
  - "text" (default): timestamp, level and logger name before the message
  - "json": one object per line; fields passed with extra={...} (sequence
    ids, used_prior flags, error details) become top-level keys

Example:
    >>> from src.utils.logger import setup_logger
    >>> logger = setup_logger(name="stage.capacity")
    >>> logger.warning("Capacity prior used", extra={"sequence_id": "s0001", "used_prior": True})
"""

import json
import logging
import os
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any

TEXT_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
TEXT_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# Attribute names of a bare LogRecord; extra={...} keys are everything else
_RECORD_ATTRS = frozenset(vars(logging.LogRecord("", logging.INFO, "", 0, "", (), None))) | {
    "message",
    "asctime",
    "taskName",
}


class JsonLineFormatter(logging.Formatter):
    """Serialise a record, its exception and its extra fields as one JSON line."""

    def format(self, record: logging.LogRecord) -> str:
        payload: dict[str, Any] = {
            "timestamp": datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(timespec="milliseconds"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        payload.update(
            (key, value) for key, value in vars(record).items() if key not in _RECORD_ATTRS and not key.startswith("_")
        )
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        return json.dumps(payload, ensure_ascii=False, default=str)


def _formatter() -> logging.Formatter:
    if os.getenv("LOG_FORMAT", "text").lower() == "json":
        return JsonLineFormatter()
    return logging.Formatter(fmt=TEXT_FORMAT, datefmt=TEXT_DATE_FORMAT)


def setup_logger(
    name: str,
    level: str | None = None,
    log_to_file: bool = False,
    log_dir: str = "logs",
) -> logging.Logger:
    """
    Configured logger for one component.

    Calling again with the same name returns the existing logger untouched,
    so module-level and per-instance setup never stack handlers.

    Args:
        name: dotted component name, e.g. 'stage.capacity' or 'main'
        level: 'DEBUG' … 'ERROR'; LOG_LEVEL (then INFO) when None
        log_to_file: also append to <log_dir>/<YYYY-MM-DD>.log
        log_dir: directory for the dated log file
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger

    level_name = (level or os.getenv("LOG_LEVEL", "INFO")).upper()
    logger.setLevel(getattr(logging, level_name, logging.INFO))

    formatter = _formatter()
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if log_to_file:
        directory = Path(log_dir)
        directory.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(directory / f"{date.today():%Y-%m-%d}.log", encoding="utf-8"))
    for handler in handlers:
        handler.setFormatter(formatter)
        logger.addHandler(handler)
    return logger
