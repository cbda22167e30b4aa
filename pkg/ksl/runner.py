"""Suite orchestration: registration, timing and report building."""

from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime

from pydantic import BaseModel, Field

from ksl.config.models import CheckResult, CheckStatus, SuiteReport
from ksl.config.settings import settings
from ksl.errors import InconclusiveError, InputError, KslError
from ksl.utils.logging import CheckTimer, logger, performance_logger


class SuiteOptions(BaseModel):
    """Per-invocation parameters shared by all suites."""

    N: int | None = Field(default=None, ge=1)
    n: int | None = Field(default=None, ge=1)
    seed: int | None = None


@dataclass(frozen=True)
class Check:
    """One named check; run returns True on pass."""

    suite: str
    name: str
    anchor: str
    run: Callable[[], bool]


SuiteBuilder = Callable[[SuiteOptions], Iterable[Check]]


class SuiteRunner:
    """Registry of suites and the executor that turns checks into a report."""

    def __init__(self) -> None:
        self._builders: dict[str, SuiteBuilder] = {}

    def suite(self, name: str) -> Callable[[SuiteBuilder], SuiteBuilder]:
        """Decorator registering a check builder under a suite name."""

        def decorator(builder: SuiteBuilder) -> SuiteBuilder:
            if name in self._builders:
                raise ValueError(f"suite {name!r} registered twice")
            self._builders[name] = builder
            return builder

        return decorator

    @property
    def suites(self) -> list[str]:
        return list(self._builders)

    def checks(self, name: str, options: SuiteOptions) -> list[Check]:
        if name not in self._builders:
            raise InputError(f"unknown suite {name!r}", "suite")
        return list(self._builders[name](options))

    def execute(self, check: Check) -> CheckResult:
        """Run one check; shortfalls are INCONCLUSIVE and any other KslError is a FAIL."""
        status = CheckStatus.FAIL
        detail: str | None = None
        limiting: str | None = None
        with CheckTimer(logger, check.suite, check.name, check.anchor) as timer:
            try:
                status = CheckStatus.PASS if check.run() else CheckStatus.FAIL
            except InconclusiveError as e:
                status = CheckStatus.INCONCLUSIVE
                detail = str(e)
                limiting = e.parameter
            except KslError as e:
                detail = str(e)
        duration_ms = timer.duration_ms

        performance_logger.log_check_execution(check.suite, check.name, duration_ms, status.value, check.anchor)
        if detail:
            timer.logger.info("Check detail", detail=detail)
        return CheckResult(
            suite=check.suite,
            name=check.name,
            anchor=check.anchor,
            status=status,
            detail=detail,
            duration_ms=round(duration_ms, 3),
            limiting_parameter=limiting,
        )

    def run(self, name: str, options: SuiteOptions | None = None) -> SuiteReport:
        """Run every check of a suite; results keep registration order."""
        options = options or SuiteOptions()
        report = SuiteReport(suite=name)
        checks = self.checks(name, options)
        logger.info("Running suite", suite=name, checks=len(checks), jobs=settings.jobs)

        if settings.jobs > 1 and len(checks) > 1:
            with ThreadPoolExecutor(max_workers=settings.jobs) as pool:
                report.results = list(pool.map(self.execute, checks))
        else:
            report.results = [self.execute(check) for check in checks]

        report.finished_at = datetime.now()
        performance_logger.log_suite_summary(
            name,
            (report.finished_at - report.started_at).total_seconds() * 1000,
            report.passed,
            report.failed,
            report.inconclusive,
        )
        return report

