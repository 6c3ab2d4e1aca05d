from __future__ import annotations

import io
import json
import logging

import numpy as np

from jostkit import logging_utils
from jostkit.logging_utils import LogFormat, create_event_logger, event_logger_for


def _make_logger(name: str):
    logger = logging.getLogger(name)
    logger.setLevel(logging.DEBUG)
    stream = io.StringIO()
    handler = logging.StreamHandler(stream)
    logger.handlers = [handler]
    return logger, handler, stream


def test_json_logging_format():
    logger, handler, stream = _make_logger("jostkit.test.json")
    event_logger = create_event_logger(logger, LogFormat.JSON)
    event_logger.log("bound_state_found", E=np.float64(-2.5), m=np.int64(1), k=1 + 2j)
    handler.flush()
    payload = json.loads(stream.getvalue())
    assert payload["event"] == "bound_state_found"
    assert payload["fields"]["E"] == -2.5
    assert payload["fields"]["m"] == 1
    assert payload["fields"]["k"] == [1.0, 2.0]
    logger.handlers.clear()


def test_human_format_contains_event_type():
    logger, handler, stream = _make_logger("jostkit.test.human")
    event_logger = create_event_logger(logger, LogFormat.HUMAN)
    event_logger.log("scan_complete", roots=2, points=400)
    handler.flush()
    message = stream.getvalue()
    assert "[scan_complete]" in message
    assert "points=400 roots=2" in message
    logger.handlers.clear()


def test_unknown_format_falls_back_to_human():
    logger, handler, stream = _make_logger("jostkit.test.fallback")
    event_logger = create_event_logger(logger, "yaml")
    assert event_logger.log_format == LogFormat.HUMAN
    logger.handlers.clear()


def test_level_is_respected():
    logger, handler, stream = _make_logger("jostkit.test.level")
    logger.setLevel(logging.INFO)
    event_logger = create_event_logger(logger, LogFormat.HUMAN)
    event_logger.log("branch_refined", level="debug", intervals=1)
    event_logger.log("unitarity_defect", level="warning", defect=1e-6)
    handler.flush()
    message = stream.getvalue()
    assert "branch_refined" not in message
    assert "unitarity_defect" in message
    logger.handlers.clear()


def test_default_format_drives_module_loggers(monkeypatch):
    monkeypatch.setattr(logging_utils, "_default_format", LogFormat.HUMAN)
    logging_utils.set_default_format("json")
    logger, handler, stream = _make_logger("jostkit.test.module")
    event_logger_for("jostkit.test.module").log("extrapolation", mu=1)
    handler.flush()
    assert json.loads(stream.getvalue())["fields"] == {"mu": 1}
    logger.handlers.clear()


def test_human_format_renders_numbers_compactly():
    logger, handler, stream = _make_logger("jostkit.test.numbers")
    event_logger = create_event_logger(logger, LogFormat.HUMAN)
    event_logger.log("extrapolation", spread=np.float64(1.23456789e-7), k=0.5 - 2j, ok=True)
    handler.flush()
    message = stream.getvalue()
    assert "k=0.5-2j" in message
    assert "ok=True" in message
    assert "spread=1.23457e-07" in message
    logger.handlers.clear()


def test_unknown_level_logs_at_info():
    logger, handler, stream = _make_logger("jostkit.test.unknown_level")
    logger.setLevel(logging.INFO)
    create_event_logger(logger, LogFormat.JSON).log("scan_complete", level="loud", roots=0)
    handler.flush()
    assert json.loads(stream.getvalue())["event"] == "scan_complete"
    logger.handlers.clear()
