"""
日志配置单元测试
"""

import logging

import pytest

from core.logging import get_metrics_logger, setup_logging
from core.schemas.configs import LoggingConfig


@pytest.fixture
def restore_logging():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)
    for handler in list(get_metrics_logger().handlers):
        get_metrics_logger().removeHandler(handler)
        handler.close()


def test_metrics_go_to_their_own_file(tmp_path, restore_logging):
    config = LoggingConfig(level="DEBUG", console_enabled=False, log_path=str(tmp_path / "logs" / "app.log"),
                           metrics_log_path=str(tmp_path / "logs" / "metrics.log"),
                           error_log_path=str(tmp_path / "logs" / "error.log"))

    setup_logging(config)
    get_metrics_logger().info("step=1 total=0.5")
    logging.getLogger("core.training").warning("slow batch")
    logging.getLogger("core.training").error("broken batch")
    for handler in logging.getLogger().handlers + get_metrics_logger().handlers:
        handler.flush()

    app = (tmp_path / "logs" / "app.log").read_text(encoding="utf-8")
    assert "slow batch" in app
    assert "step=1" not in app
    assert "step=1 total=0.5" in (tmp_path / "logs" / "metrics.log").read_text(encoding="utf-8")
    errors = (tmp_path / "logs" / "error.log").read_text(encoding="utf-8")
    assert "broken batch" in errors and "slow batch" not in errors


def test_setup_is_idempotent(restore_logging):
    setup_logging(LoggingConfig(level="WARNING"))
    setup_logging(LoggingConfig(level="WARNING"))

    assert len(logging.getLogger().handlers) == 1
    assert logging.getLogger().level == logging.WARNING
    assert len(get_metrics_logger().handlers) == 1
    assert not get_metrics_logger().propagate
