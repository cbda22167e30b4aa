"""Tests for the command-line front end."""

import json
from pathlib import Path

import pytest
from pytest_mock import MockerFixture

from ksl.errors import InconclusiveError
from ksl.main import main
from ksl.runner import Check, SuiteOptions, SuiteRunner
from ksl.services.distrib import Coset, TestFn
from ksl.services.ksymbol import KnSym, symbol
from ksl.services.thetasiegel import TorsionPoint

P = TorsionPoint.of


@pytest.fixture
def level_three_coset(tmp_path: Path) -> Path:
    path = tmp_path / "f.json"
    phi = TestFn.indicator(Coset.of(["1/3", 0, 0, "1/3"]))
    path.write_text(phi.to_model().model_dump_json())
    return path


def _lines(capsys: pytest.CaptureFixture[str]) -> list[str]:
    return capsys.readouterr().out.splitlines()


class TestExpand:
    def test_siegel_leading_term(self, capsys: pytest.CaptureFixture[str], override_settings) -> None:  # type: ignore[no-untyped-def]
        override_settings(trunc="5")
        assert main(["expand", "siegel", "0/1", "1/2", "--trunc", "3"]) == 0
        lines = _lines(capsys)
        assert lines[0].startswith("conductor")
        assert lines[1].startswith("1/12 : 2")

    def test_siegel_at_zero(self, capsys: pytest.CaptureFixture[str], override_settings) -> None:  # type: ignore[no-untyped-def]
        override_settings(trunc="5")
        assert main(["expand", "siegel", "0/1", "0/1"]) == 0
        assert _lines(capsys)[1:] == ["0 : 1"]

    def test_ntheta_valuation(self, capsys: pytest.CaptureFixture[str], override_settings) -> None:  # type: ignore[no-untyped-def]
        override_settings(trunc="5")
        assert main(["expand", "ntheta", "--N", "2", "--a", "0/1,0/1", "--trunc", "2"]) == 0
        assert _lines(capsys)[0] == "valuation 1/4"

    @pytest.mark.parametrize("coords", [["1/0", "0"], ["x", "0"], ["1/2"]])
    def test_invalid_point(self, coords: list[str]) -> None:
        assert main(["expand", "siegel", *coords]) == 2

    def test_invalid_trunc(self, override_settings) -> None:  # type: ignore[no-untyped-def]
        override_settings(trunc="5")
        assert main(["expand", "theta", "--trunc", "0"]) == 2


class TestRelators:
    def test_single_relation_at_level_two(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["relators", "--N", "2", "--n", "2", "--kinds", "manin"]) == 0
        dump = json.loads(capsys.readouterr().out)
        assert dump["count"] == 1
        assert dump["rank"] == 1

    def test_level_one_is_empty(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["relators", "--N", "1", "--n", "2"]) == 0
        dump = json.loads(capsys.readouterr().out)
        assert dump["count"] == 0
        assert dump["relators"] == []

    def test_unknown_kind(self) -> None:
        assert main(["relators", "--N", "2", "--kinds", "steinberg"]) == 2


class TestEval:
    def test_xi2(self, capsys: pytest.CaptureFixture[str], level_three_coset: Path) -> None:
        assert main(["eval", "xi2", "inf", "0", str(level_three_coset)]) == 0
        assert KnSym.from_json(capsys.readouterr().out) == symbol(P("1/3", 0), P(0, "1/3"))

    def test_xin_identity_matches_xi2(self, capsys: pytest.CaptureFixture[str], level_three_coset: Path) -> None:
        main(["eval", "xi2", "inf", "0", str(level_three_coset)])
        first = capsys.readouterr().out
        assert main(["eval", "xin", "--matrix", "1,0;0,1", str(level_three_coset)]) == 0
        assert capsys.readouterr().out == first

    def test_xin_dependent_rows(self, capsys: pytest.CaptureFixture[str], level_three_coset: Path) -> None:
        assert main(["eval", "xin", "--matrix", "1,0;2,0", str(level_three_coset)]) == 0
        assert KnSym.from_json(capsys.readouterr().out).is_zero()

    def test_equal_cusps(self, level_three_coset: Path) -> None:
        assert main(["eval", "xi2", "inf", "inf", str(level_three_coset)]) == 2

    def test_malformed_json(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.json"
        path.write_text('{"dim": "four"}')
        assert main(["eval", "xi2", "inf", "0", str(path)]) == 2

    def test_missing_file(self, tmp_path: Path) -> None:
        assert main(["eval", "xi2", "inf", "0", str(tmp_path / "absent.json")]) == 2


class TestVerify:
    @staticmethod
    def _runner(*outcomes: str) -> SuiteRunner:
        runner = SuiteRunner()

        def outcome(kind: str) -> bool:
            if kind == "inconclusive":
                raise InconclusiveError("ran short", "trunc", 2, 5)
            return kind == "pass"

        @runner.suite("manin")
        def build(options: SuiteOptions) -> list[Check]:
            return [Check("manin", f"check{i}", "test.anchor", lambda k=kind: outcome(k)) for i, kind in enumerate(outcomes)]

        return runner

    @pytest.mark.parametrize(
        ("outcomes", "code"),
        [(("pass", "pass"), 0), (("pass", "fail"), 1), (("pass", "inconclusive"), 3), (("inconclusive", "fail"), 1)],
    )
    def test_exit_codes(self, mocker: MockerFixture, outcomes: tuple[str, ...], code: int) -> None:
        mocker.patch("ksl.main.create_runner", return_value=self._runner(*outcomes))
        assert main(["verify", "manin"]) == code

    def test_report_is_deterministic(self, capsys: pytest.CaptureFixture[str], mocker: MockerFixture) -> None:
        mocker.patch("ksl.main.create_runner", side_effect=lambda: self._runner("pass", "inconclusive"))
        main(["verify", "manin"])
        first = capsys.readouterr().out
        main(["verify", "manin"])
        assert capsys.readouterr().out == first
        report = json.loads(first)
        assert "started_at" not in report
        assert [r["name"] for r in report["results"]] == ["check0", "check1"]
        assert report["results"][1]["limiting_parameter"] == "trunc"
        assert all(r["anchor"] == "test.anchor" for r in report["results"])

    def test_level_cap(self, override_settings) -> None:  # type: ignore[no-untyped-def]
        override_settings(level_cap=8)
        assert main(["verify", "modsym", "--N", "5", "--level-cap", "4"]) == 2

    def test_seed_reaches_options(self, mocker: MockerFixture, override_settings) -> None:  # type: ignore[no-untyped-def]
        override_settings(seed=0)
        seen: list[SuiteOptions] = []
        runner = SuiteRunner()

        @runner.suite("axioms")
        def build(options: SuiteOptions) -> list[Check]:
            seen.append(options)
            return []

        mocker.patch("ksl.main.create_runner", return_value=runner)
        assert main(["verify", "axioms", "--N", "3", "--seed", "11"]) == 0
        assert (seen[0].N, seen[0].seed) == (3, 11)

    @pytest.mark.slow
    def test_manin_level_three(self) -> None:
        assert main(["verify", "manin", "--N", "3"]) == 0

    @pytest.mark.slow
    def test_manin_level_two_lift(self) -> None:
        assert main(["verify", "manin", "--N", "2"]) == 0

    def test_numeric_suite_exits_zero(self, capsys: pytest.CaptureFixture[str], override_settings) -> None:  # type: ignore[no-untyped-def]
        override_settings(trunc="5")
        assert main(["verify", "numeric"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert {r["status"] for r in report["results"]} == {"pass"}

    @pytest.mark.slow
    def test_theta_suite_level_five(self, override_settings) -> None:  # type: ignore[no-untyped-def]
        override_settings(trunc="5")
        assert main(["verify", "theta", "--N", "5"]) == 0
