"""Tests for logging configuration."""

import logging

import pytest

from config.settings import Settings
from utils.logging_config import PROJECT_LOGGERS, build_log_config, get_logger, run_log


@pytest.fixture
def quiet_settings():
    return Settings.from_env({"LOG_LEVEL": "WARNING"})


class TestBuildLogConfig:
    """Test the dictConfig payload."""

    def test_console_writes_to_stderr(self, quiet_settings):
        config = build_log_config(quiet_settings)
        assert config["handlers"]["console"]["stream"] == "ext://sys.stderr"

    def test_every_package_logger_configured(self, quiet_settings):
        loggers = build_log_config(quiet_settings)["loggers"]
        assert all(loggers[name]["level"] == "WARNING" for name in PROJECT_LOGGERS)
        assert loggers["PIL"] == {"level": "WARNING"}

    def test_debug_flag_overrides_level(self):
        config = build_log_config(Settings.from_env({"LOG_LEVEL": "ERROR", "DEBUG": True}))
        assert config["handlers"]["console"]["level"] == "DEBUG"
        assert config["loggers"]["core"]["level"] == "DEBUG"

    def test_json_formatter_selected(self):
        config = build_log_config(Settings.from_env({"LOG_JSON_FORMAT": True}))
        assert config["handlers"]["console"]["formatter"] == "json"


class TestRunLog:
    """Test the per-run log file."""

    def test_records_info_and_detaches(self, tmp_path, quiet_settings):
        path = tmp_path / "run" / "run.log"
        logger = get_logger("core.algorithms.training_engine")
        core = logging.getLogger("core")
        level_before = core.level

        with run_log(path, quiet_settings):
            logger.info("iter 10/500 loss 0.6931")
        logger.info("after the run")

        text = path.read_text(encoding="utf-8")
        assert "iter 10/500 loss 0.6931" in text
        assert "after the run" not in text
        assert core.level == level_before
        assert not any(isinstance(h, logging.FileHandler) for h in core.handlers)

    def test_json_lines(self, tmp_path):
        path = tmp_path / "run.log"
        with run_log(path, Settings.from_env({"LOG_JSON_FORMAT": True})):
            get_logger("infrastructure.data.dataset_store").warning("missing mask")
        assert '"level": "WARNING", "message": "missing mask"' in path.read_text(encoding="utf-8")

    def test_foreign_loggers_not_captured(self, tmp_path, quiet_settings):
        path = tmp_path / "run.log"
        with run_log(path, quiet_settings):
            logging.getLogger("somebody.else").warning("not ours")
        assert "not ours" not in path.read_text(encoding="utf-8")
