"""Structured logging for ksl.

Logs are written to stderr; stdout carries only reports, series and JSON dumps.
"""

import logging
import sys
import time
import types
from typing import Any, cast

import structlog
from structlog.typing import FilteringBoundLogger, Processor

from ksl.config.settings import settings


def _renderer() -> Processor:
    if settings.log_format == "json":
        return structlog.processors.JSONRenderer(sort_keys=True)
    return structlog.dev.ConsoleRenderer(colors=False)


def configure_logging() -> FilteringBoundLogger:
    """Configure structlog from the current settings; safe to call again after overrides."""
    level = getattr(logging, settings.log_level.upper())
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.dev.set_exc_info,
            structlog.processors.StackInfoRenderer(),
            _renderer(),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.WriteLoggerFactory(file=sys.stderr),
        # CLI overrides reconfigure after import
        cache_logger_on_first_use=False,
    )
    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=level)
    return cast(FilteringBoundLogger, structlog.get_logger())


class CheckTimer:
    """Times one verification check and binds its identity to the log lines."""

    def __init__(self, logger: FilteringBoundLogger, suite: str, check: str, anchor: str):
        self.logger = logger.bind(suite=suite, check=check, anchor=anchor)
        self.duration_ms = 0.0
        self._start = 0.0

    def __enter__(self) -> "CheckTimer":
        self._start = time.perf_counter()
        self.logger.debug("Check started")
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: types.TracebackType | None,
    ) -> None:
        self.duration_ms = (time.perf_counter() - self._start) * 1000
        if exc_type:
            self.logger.error(
                "Check aborted",
                duration_ms=self.duration_ms,
                error_type=exc_type.__name__,
                error_message=str(exc_val),
            )


class PerformanceLogger:
    """Timing records for checks and whole suites."""

    def __init__(self, logger: FilteringBoundLogger):
        self.logger = logger

    def log_operation_performance(
        self,
        operation: str,
        duration_ms: float,
        success: bool = True,
        metadata: dict[str, Any] | None = None,
    ) -> None:
        log_data: dict[str, Any] = {"operation": operation, "duration_ms": round(duration_ms, 3), "success": success}
        if metadata:
            log_data.update(metadata)
        if success:
            self.logger.debug("Operation completed", **log_data)
        else:
            self.logger.warning("Operation failed", **log_data)

    def log_check_execution(self, suite: str, check: str, duration_ms: float, status: str, anchor: str) -> None:
        """Record one check; anything but a pass is logged at warning."""
        self.log_operation_performance(
            operation="check",
            duration_ms=duration_ms,
            success=status == "pass",
            metadata={"suite": suite, "check": check, "status": status, "anchor": anchor},
        )

    def log_suite_summary(self, suite: str, duration_ms: float, passed: int, failed: int, inconclusive: int) -> None:
        self.log_operation_performance(
            operation="suite",
            duration_ms=duration_ms,
            success=failed == 0,
            metadata={"suite": suite, "passed": passed, "failed": failed, "inconclusive": inconclusive},
        )


logger = configure_logging()
performance_logger = PerformanceLogger(logger)
