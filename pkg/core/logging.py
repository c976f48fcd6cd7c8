import logging
import os
from logging import Formatter, Handler, StreamHandler
from logging.handlers import RotatingFileHandler
from typing import Optional

try:
    # Typed import; runtime optional
    from core.schemas.configs import LoggingConfig
except Exception:  # pragma: no cover
    LoggingConfig = None  # type: ignore

METRICS_LOGGER = "metrics"
MAX_LOG_BYTES = 10 * 1024 * 1024
LOG_BACKUPS = 5

# third-party loggers that are chatty at INFO/DEBUG
_QUIET_LOGGERS = ("matplotlib", "PIL")

_APP_FORMAT = Formatter(fmt="%(asctime)s - %(name)s - %(levelname)s - %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
_METRICS_FORMAT = Formatter(fmt="%(asctime)s %(message)s", datefmt="%Y-%m-%d %H:%M:%S")


def _level_from_string(level_str: str) -> int:
    mapping = {
        "DEBUG": logging.DEBUG,
        "INFO": logging.INFO,
        "WARNING": logging.WARNING,
        "ERROR": logging.ERROR,
        "CRITICAL": logging.CRITICAL,
    }
    return mapping.get(level_str.upper(), logging.INFO)


def _file_handler(path: str, level: int, formatter: Formatter) -> Handler:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    handler = RotatingFileHandler(path, maxBytes=MAX_LOG_BYTES, backupCount=LOG_BACKUPS, encoding="utf-8")
    handler.setLevel(level)
    handler.setFormatter(formatter)
    return handler


def _console_handler(level: int, formatter: Formatter) -> Handler:
    handler = StreamHandler()
    handler.setLevel(level)
    handler.setFormatter(formatter)
    return handler


def _reset(logger: logging.Logger) -> None:
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()


def setup_logging(logging_config: Optional["LoggingConfig"]) -> None:
    """
    Initialize logging from LoggingConfig.

    - Root logger: application logs to console (optional) and a rotating file
    - Error file: records at ERROR and above, when a path is configured
    - 'metrics' logger: per-step training losses and evaluation summaries; goes to its own
      file, or to the console when no file is configured
    """
    level = logging.INFO
    console_enabled = True
    log_path = metrics_log_path = error_log_path = None
    if logging_config is not None:
        level = _level_from_string(logging_config.level)
        console_enabled = logging_config.console_enabled
        log_path = logging_config.log_path
        metrics_log_path = logging_config.metrics_log_path
        error_log_path = logging_config.error_log_path

    root_logger = logging.getLogger()
    _reset(root_logger)
    root_logger.setLevel(level)
    if console_enabled:
        root_logger.addHandler(_console_handler(level, _APP_FORMAT))
    if log_path:
        root_logger.addHandler(_file_handler(log_path, level, _APP_FORMAT))
    if error_log_path:
        root_logger.addHandler(_file_handler(error_log_path, logging.ERROR, _APP_FORMAT))

    for name in _QUIET_LOGGERS:
        logging.getLogger(name).setLevel(max(level, logging.WARNING))

    # metrics records stay out of the app log
    metrics_logger = logging.getLogger(METRICS_LOGGER)
    _reset(metrics_logger)
    metrics_logger.propagate = False
    metrics_logger.setLevel(logging.INFO)
    if metrics_log_path:
        metrics_logger.addHandler(_file_handler(metrics_log_path, logging.INFO, _METRICS_FORMAT))
    elif console_enabled:
        metrics_logger.addHandler(_console_handler(logging.INFO, _METRICS_FORMAT))


def get_metrics_logger() -> logging.Logger:
    return logging.getLogger(METRICS_LOGGER)
