"""Tests for suite registration and execution."""

import pytest
from pytest_mock import MockerFixture

from ksl.config.models import CheckStatus
from ksl.errors import ArithmeticFailure, CertificateError, InconclusiveError, InputError
from ksl.main import create_runner
from ksl.runner import Check, SuiteOptions, SuiteRunner
from ksl.services.ksymbol import KnSym
from ksl.services.thetasiegel import TorsionPoint
from ksl.suites import symbols
from ksl.suites.symbols import COCYCLE_SAMPLES, cocycle_tuples
from ksl.utils.helpers import seeded_rng


def _raise(error: Exception) -> bool:
    raise error


@pytest.fixture
def runner() -> SuiteRunner:
    runner = SuiteRunner()

    @runner.suite("mixed")
    def build(options: SuiteOptions) -> list[Check]:
        return [
            Check("mixed", "pass", "a", lambda: True),
            Check("mixed", "fail", "b", lambda: False),
            Check("mixed", "short", "c", lambda: _raise(InconclusiveError("short", "tol", 1e-6, 1e-9))),
            Check("mixed", "witness", "d", lambda: _raise(CertificateError("not in span", {"x": 1}))),
            Check("mixed", "arith", "e", lambda: _raise(ArithmeticFailure("zero inverse"))),
        ]

    return runner


class TestSuiteRunner:
    def test_statuses(self, runner: SuiteRunner) -> None:
        report = runner.run("mixed")
        statuses = [r.status for r in report.results]
        assert statuses == [
            CheckStatus.PASS,
            CheckStatus.FAIL,
            CheckStatus.INCONCLUSIVE,
            CheckStatus.FAIL,
            CheckStatus.FAIL,
        ]
        assert report.results[2].limiting_parameter == "tol"
        assert report.results[3].detail == "not in span"
        assert report.exit_code == 1
        assert report.finished_at is not None

    def test_parallel_keeps_order(self, runner: SuiteRunner, override_settings) -> None:  # type: ignore[no-untyped-def]
        override_settings(jobs=3)
        names = [r.name for r in runner.run("mixed").results]
        assert names == ["pass", "fail", "short", "witness", "arith"]

    def test_errors_inside_a_check_fail_only_that_check(self) -> None:
        runner = SuiteRunner()

        @runner.suite("bad")
        def build(options: SuiteOptions) -> list[Check]:
            return [
                Check("bad", "misuse", "x", lambda: _raise(InputError("bad point", "a"))),
                Check("bad", "fine", "y", lambda: True),
            ]

        report = runner.run("bad")
        assert [r.status for r in report.results] == [CheckStatus.FAIL, CheckStatus.PASS]
        assert report.results[0].detail == "[a] bad point"
        assert report.exit_code == 1

    def test_input_errors_while_building_propagate(self) -> None:
        runner = SuiteRunner()

        @runner.suite("bad")
        def build(options: SuiteOptions) -> list[Check]:
            raise InputError("N too large", "N")

        with pytest.raises(InputError):
            runner.run("bad")

    def test_unknown_suite(self, runner: SuiteRunner) -> None:
        with pytest.raises(InputError):
            runner.run("nope")

    def test_duplicate_registration(self, runner: SuiteRunner) -> None:
        with pytest.raises(ValueError):
            runner.suite("mixed")(lambda options: [])

    def test_only_inconclusive_gives_three(self) -> None:
        runner = SuiteRunner()

        @runner.suite("short")
        def build(options: SuiteOptions) -> list[Check]:
            return [
                Check("short", "ok", "a", lambda: True),
                Check("short", "short", "b", lambda: _raise(InconclusiveError("short"))),
            ]

        assert runner.run("short").exit_code == 3


class TestRegisteredSuites:
    def test_every_suite_is_registered(self) -> None:
        assert sorted(create_runner().suites) == sorted(
            ["theta", "siegel", "numeric", "residue", "manin", "cocycle", "mu", "modsym", "axioms"]
        )

    def test_checks_carry_anchors(self) -> None:
        checks = create_runner().checks("modsym", SuiteOptions(N=3))
        assert checks
        assert all(c.anchor.startswith("modsym.") for c in checks)

    def test_manin_triples_at_level_two(self) -> None:
        checks = create_runner().checks("manin", SuiteOptions(N=2))
        # the rank check plus one cyclic class of (1/2,0), (0,1/2), (1/2,1/2) and its reverse
        assert checks[0].name == "single relation at level 2"
        assert len(checks) == 3

    def test_manin_checks_compare_the_derivation_exactly(self, mocker: MockerFixture) -> None:
        spy = mocker.spy(symbols, "relators")
        checks = create_runner().checks("manin", SuiteOptions(N=3))[:2]
        assert all(c.run() for c in checks)
        assert spy.call_count == 0

    def test_manin_check_rejects_a_wrong_derivation(self, mocker: MockerFixture) -> None:
        mocker.patch("ksl.suites.symbols.derive_manin", return_value=KnSym.zero(2))
        check = create_runner().checks("manin", SuiteOptions(N=3))[0]
        assert check.run() is False

    def test_residue_needs_level_three(self) -> None:
        with pytest.raises(InputError):
            create_runner().checks("residue", SuiteOptions(N=2))

    @pytest.mark.parametrize(
        ("n", "N"),
        [(2, 3), (2, 4), (2, 5), (3, 3), (3, 4), pytest.param(3, 5, marks=pytest.mark.slow)],
    )
    def test_cocycle_sample_lies_in_span(self, n: int, N: int) -> None:
        report = create_runner().run("cocycle", SuiteOptions(N=N, n=n, seed=11))
        assert len(report.results) == COCYCLE_SAMPLES
        assert all(r.status == CheckStatus.PASS for r in report.results)
        assert report.exit_code == 0

    def test_modsym_unimodular_checks(self) -> None:
        # the triangle through 1/2 is the only one with a non-unimodular alpha
        checks = [c for c in create_runner().checks("modsym", SuiteOptions(N=3)) if "1/2" not in c.name]
        assert len(checks) == 13
        assert all(c.run() for c in checks)

    def test_numeric_suite_passes_at_default_precision(self, override_settings) -> None:  # type: ignore[no-untyped-def]
        override_settings(trunc="5", tol=1e-9)
        report = create_runner().run("numeric", SuiteOptions())
        assert [r.name for r in report.results if r.status != CheckStatus.PASS] == []
        assert any(r.name == "epsilon(S) N=6" for r in report.results)
        assert report.exit_code == 0


class TestCocycleTuples:
    def test_sums_and_count(self) -> None:
        tuples = cocycle_tuples(3, 2, 20, seeded_rng(5))
        assert len(tuples) == 20
        assert len(set(tuples)) == 20
        for a0, *rest in tuples:
            total = TorsionPoint.zero()
            for p in rest:
                total = total + p
            assert total == a0
            assert not a0.is_zero()

    def test_same_seed_same_sample(self) -> None:
        assert cocycle_tuples(4, 3, 20, seeded_rng(9)) == cocycle_tuples(4, 3, 20, seeded_rng(9))

    def test_repeated_summands_are_drawn(self) -> None:
        # 8 * 8 ordered pairs of nonzero points at level 3, less the 8 with a1 + a2 = 0
        tuples = cocycle_tuples(3, 2, 56, seeded_rng(0))
        assert len(tuples) == 56
        assert sum(1 for _, a1, a2 in tuples if a1 == a2) == 8

    def test_level_two_exhausts_distinct_pairs(self) -> None:
        tuples = cocycle_tuples(2, 2, 20, seeded_rng(0))
        assert len(tuples) == 6
        assert all(a1 != a2 for _, a1, a2 in tuples)

    def test_level_one_has_no_tuples(self) -> None:
        assert cocycle_tuples(1, 2, 20, seeded_rng(0)) == []

    def test_default_seed_comes_from_settings(self, override_settings) -> None:  # type: ignore[no-untyped-def]
        override_settings(seed=3)
        checks = create_runner().checks("cocycle", SuiteOptions(N=3, n=2))
        expected = cocycle_tuples(3, 2, COCYCLE_SAMPLES, seeded_rng(3))
        assert [c.name for c in checks] == [f"cocycle {''.join(str(p) for p in t)} N=3" for t in expected]
