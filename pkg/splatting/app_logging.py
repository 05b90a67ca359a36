"""Logging layer for the splatting tools: run ID and environment-aware handlers.

configure_logging() assigns a random run ID and installs handlers on the root logger:

- Always: StreamHandler(sys.stderr). stdout stays reserved for machine-readable
  output (training log records, key=value metric lines).
- When SPLAT_LOG_DIR is set: TimedRotatingFileHandler to $SPLAT_LOG_DIR/splatting.log
  (daily rotation, keep 30 days).

Log level is read from LOG_LEVEL (default INFO). Example: LOG_LEVEL=DEBUG.
"""

from __future__ import annotations

import logging
import logging.handlers
import os
import sys
import uuid
from pathlib import Path

_LOG_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "WARN": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}

_HANDLER_MARKER = "splatting_marker"

_run_id: str = ""


def _get_log_level() -> int:
    """Log level from LOG_LEVEL env (default INFO)."""
    raw = (os.environ.get("LOG_LEVEL") or "INFO").strip().upper()
    return _LOG_LEVELS.get(raw, logging.INFO)


def _new_run_id() -> str:
    """Return a short random run ID (12 hex chars)."""
    return uuid.uuid4().hex[:12]


def get_run_id() -> str:
    """Return the run ID (set after configure_logging)."""
    return _run_id


class RunFilter(logging.Filter):
    """Add run_id to every LogRecord."""

    def __init__(self, run_id: str) -> None:
        super().__init__()
        self._run_id = run_id

    def filter(self, record: logging.LogRecord) -> bool:
        record.run_id = getattr(record, "run_id", self._run_id)
        return True


def configure_logging(log_dir: Path | str | None = None) -> str:
    """Configure process-wide logging: stderr always, rotating file when a log dir is known. Returns run ID."""
    global _run_id
    _run_id = _new_run_id()
    level = _get_log_level()

    formatter = logging.Formatter(
        "%(asctime)s [%(levelname)s] run=%(run_id)s %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    run_filter = RunFilter(_run_id)

    root = logging.getLogger()
    root.setLevel(level)
    # Avoid duplicate handlers if this is called more than once (tests, repeated CLI calls).
    for h in root.handlers[:]:
        if getattr(h, _HANDLER_MARKER, False):
            root.removeHandler(h)

    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setLevel(level)
    stream_handler.setFormatter(formatter)
    stream_handler.addFilter(run_filter)
    setattr(stream_handler, _HANDLER_MARKER, True)
    root.addHandler(stream_handler)

    target = log_dir if log_dir is not None else os.environ.get("SPLAT_LOG_DIR")
    if target:
        logs_dir = Path(target)
        logs_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.TimedRotatingFileHandler(
            logs_dir / "splatting.log",
            when="midnight",
            interval=1,
            backupCount=30,
            encoding="utf-8",
        )
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        file_handler.addFilter(run_filter)
        setattr(file_handler, _HANDLER_MARKER, True)
        root.addHandler(file_handler)

    return _run_id


def get_logger(name: str) -> logging.Logger:
    """Return a logger for the given module (use __name__)."""
    return logging.getLogger(name)
