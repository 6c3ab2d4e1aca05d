"""
Structured event logging for jostkit.

Events are emitted through ordinary `logging.Logger` objects, either as a
readable `[event] timestamp | key=value` line or as one JSON object per line.
Field values may be numpy scalars, arrays or complex numbers.
"""

from __future__ import annotations

import json
import logging
from datetime import datetime, timezone
from enum import Enum
from typing import Any

import numpy as np


class LogFormat(str, Enum):
    HUMAN = "human"
    JSON = "json"


def _parse_format(fmt: str | LogFormat) -> LogFormat:
    try:
        return LogFormat(fmt)
    except ValueError:
        return LogFormat.HUMAN


def _plain_value(value: Any) -> Any:
    """Convert numpy scalars, complex numbers and arrays into JSON-safe values."""
    if isinstance(value, np.ndarray):
        return [_plain_value(item) for item in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, (list, tuple)):
        return [_plain_value(item) for item in value]
    return value


def _human_value(value: Any) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, complex):
        return f"{value.real:.6g}{value.imag:+.6g}j"
    if isinstance(value, np.ndarray):
        return np.array2string(value, precision=6, separator=",")
    return str(value)


class EventLogger:
    """Emit named events with keyword fields in human or JSON format."""

    def __init__(self, logger: logging.Logger, log_format: LogFormat = LogFormat.HUMAN) -> None:
        self.logger = logger
        self.log_format = log_format

    def log(self, event_type: str, *, level: str = "info", **fields: Any) -> None:
        levelno = logging.getLevelName(level.upper())
        if not isinstance(levelno, int):
            levelno = logging.INFO
        # scans emit per-root debug events; skip formatting when filtered out
        if not self.logger.isEnabledFor(levelno):
            return
        timestamp = datetime.now(timezone.utc).isoformat()

        if self.log_format == LogFormat.JSON:
            payload = {
                "timestamp": timestamp,
                "event": event_type,
                "fields": {key: _plain_value(value) for key, value in fields.items()},
            }
            self.logger.log(levelno, json.dumps(payload, separators=(",", ":")))
            return

        message = f"[{event_type}] {timestamp}"
        if fields:
            message += " | " + " ".join(f"{key}={_human_value(fields[key])}" for key in sorted(fields))
        self.logger.log(levelno, message)


def create_event_logger(logger: logging.Logger, fmt: str | LogFormat) -> EventLogger:
    return EventLogger(logger, _parse_format(fmt))


_default_format: LogFormat = LogFormat.HUMAN


def set_default_format(fmt: str | LogFormat) -> None:
    """Select the format used by `event_logger_for`; the CLI sets it from --json-log."""
    global _default_format
    _default_format = _parse_format(fmt)


def event_logger_for(name: str) -> EventLogger:
    return EventLogger(logging.getLogger(name), _default_format)
