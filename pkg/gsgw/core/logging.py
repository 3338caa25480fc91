"""Structured JSON logs for command runs."""
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import numpy as np

# LogRecord attributes copied into the JSON line when a caller passes them via extra=
CONTEXT_FIELDS = ("run_id", "command", "seed", "restart", "step", "method", "path")

_STARTED = time.perf_counter()


def _to_json(value: Any) -> Any:
    """numpy scalars and arrays in extras become plain JSON values."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


class JSONFormatter(logging.Formatter):
    """One JSON object per record: source location, run context, elapsed milliseconds."""

    def format(self, record: logging.LogRecord) -> str:
        entry = {
            "timestamp": datetime.fromtimestamp(record.created, timezone.utc).isoformat(),
            "elapsed_ms": round((time.perf_counter() - _STARTED) * 1000.0, 3),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }
        entry.update({key: getattr(record, key) for key in CONTEXT_FIELDS if hasattr(record, key)})
        if record.exc_info:
            entry["exception"] = self.formatException(record.exc_info)
        return json.dumps(entry, default=_to_json)


def _json_handler(handler: logging.Handler) -> logging.Handler:
    handler.setFormatter(JSONFormatter())
    return handler


def setup_logging(log_level: str = "INFO", log_file: Optional[str] = None) -> None:
    """
    Route every record to stderr, and to log_file when given, as JSON lines.

    stdout carries only the result records a command prints.

    Args:
        log_level: DEBUG, INFO, WARNING, ERROR or CRITICAL
        log_file: Optional log file path; its directory is created
    """
    global _STARTED
    _STARTED = time.perf_counter()

    root = logging.getLogger()
    root.setLevel(log_level.upper())
    for handler in list(root.handlers):
        root.removeHandler(handler)

    root.addHandler(_json_handler(logging.StreamHandler(sys.stderr)))
    if log_file:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        root.addHandler(_json_handler(logging.FileHandler(path, encoding="utf-8")))

    # third-party loggers stay at INFO or above
    for noisy in ("sklearn", "scipy"):
        logging.getLogger(noisy).setLevel(max(root.level, logging.INFO))


def get_logger(name: str) -> logging.Logger:
    """Module logger; configuration is inherited from the root set up by setup_logging."""
    return logging.getLogger(name)
