import logging

from loguru import logger


class InterceptHandler(logging.Handler):
    """Route stdlib logging records (numpy, joblib, matplotlib) into loguru."""

    def emit(self, record: logging.LogRecord) -> None:  # pragma: no cover
        try:
            level = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno
        logger_opt = logger.opt(depth=6, exception=record.exc_info)
        logger_opt.log(level, record.getMessage())


__all__ = ["InterceptHandler", "logger"]
