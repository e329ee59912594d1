"""
Test basic setup and imports
"""

import logging
import os
import sys
import tempfile

import pytest

# Add the project root to the path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import inbetween
from inbetween.logging_config import ROOT_LOGGER_NAME, get_logger, setup_logger


def test_package_import():
    """Test that the main package can be imported."""
    assert inbetween.__version__ == "0.1.0"
    assert "inbetweening" in inbetween.__description__
    for name in inbetween.__all__:
        assert hasattr(inbetween, name)


def test_logging_setup():
    """Test that logging configuration works."""
    logger = setup_logger("test_logger", "DEBUG")
    assert logger.name == "test_logger"
    assert logger.level == logging.DEBUG


def test_logging_setup_replaces_handlers():
    """Calling setup twice must not stack handlers."""
    setup_logger("test_repeat_logger", "INFO")
    logger = setup_logger("test_repeat_logger", "INFO")
    assert len(logger.handlers) == 1


def test_logging_setup_with_file():
    """Test that logging configuration works with file logging."""
    with tempfile.NamedTemporaryFile(delete=False, suffix=".log") as f:
        log_file = f.name

    try:
        logger = setup_logger("test_file_logger", "INFO", log_file=log_file)
        assert logger.level == logging.INFO
        logger.info("Test message")
        for handler in logger.handlers:
            handler.flush()

        with open(log_file, "r") as f:
            assert "Test message" in f.read()
    finally:
        for handler in logging.getLogger("test_file_logger").handlers[:]:
            handler.close()
        if os.path.exists(log_file):
            os.unlink(log_file)


def test_component_loggers_are_children():
    """Component loggers hang under the package logger."""
    logger = get_logger("training")
    assert logger.name == f"{ROOT_LOGGER_NAME}.training"
    assert get_logger().name == ROOT_LOGGER_NAME
    assert get_logger().handlers


def test_unknown_level_rejected():
    """Misspelled levels fail instead of silently defaulting."""
    with pytest.raises(ValueError, match="LOUD"):
        setup_logger("test_bad_level", "LOUD")


def test_debug_format_includes_source_location():
    logger = setup_logger("test_debug_logger", "DEBUG", debug=True)
    assert "%(lineno)d" in logger.handlers[0].formatter._fmt


def test_bad_log_file_falls_back_to_console(tmp_path):
    logger = setup_logger("test_bad_file_logger", "INFO", log_file=str(tmp_path / "missing" / "run.log"))
    assert len(logger.handlers) == 1
