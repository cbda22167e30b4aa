"""Tests for settings, environment fallbacks and input validation."""

from fractions import Fraction

from pydantic import ValidationError
import pytest

from ksl.config.settings import Settings
from ksl.config.validation import InputValidator
from ksl.errors import InputError
from ksl.services.modsym import Cusp
from ksl.services.thetasiegel import TorsionPoint


class TestSettings:
    def test_defaults(self, monkeypatch: pytest.MonkeyPatch) -> None:
        for name in ("KSL_TRUNC", "KSL_LEVEL_CAP", "KSL_SEED", "KSL_TOL", "KSL_JOBS", "KSL_AXIOM_SAMPLES"):
            monkeypatch.delenv(name, raising=False)
        config = Settings(_env_file=None)  # type: ignore[call-arg]
        assert config.trunc_value == 5
        assert config.level_cap == 8
        assert config.tol == 1e-9
        assert config.jobs == 1
        assert config.axiom_samples == 20

    def test_environment_fallbacks(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv("KSL_TRUNC", "7/2")
        monkeypatch.setenv("KSL_LEVEL_CAP", "6")
        monkeypatch.setenv("KSL_SEED", "42")
        monkeypatch.setenv("KSL_JOBS", "4")
        config = Settings(_env_file=None)  # type: ignore[call-arg]
        assert config.trunc_value == Fraction(7, 2)
        assert (config.level_cap, config.seed, config.jobs) == (6, 42, 4)

    @pytest.mark.parametrize(
        ("field", "value"), [("trunc", "0"), ("trunc", "abc"), ("level_cap", 0), ("jobs", 0), ("axiom_samples", 0), ("tol", -1.0)]
    )
    def test_rejects_invalid_values(self, field: str, value: object) -> None:
        with pytest.raises(ValidationError):
            Settings(_env_file=None, **{field: value})  # type: ignore[arg-type]


class TestInputValidator:
    def test_rational(self) -> None:
        assert InputValidator.validate_rational("-3/6") == Fraction(-1, 2)
        with pytest.raises(InputError):
            InputValidator.validate_rational("1.5")

    def test_point(self) -> None:
        assert InputValidator.validate_point("1/3,-1/3") == TorsionPoint.of("1/3", "2/3")
        with pytest.raises(InputError):
            InputValidator.validate_point("1/3")

    def test_matrix(self) -> None:
        assert InputValidator.validate_matrix("1,0;2,0") == ((1, 0), (2, 0))
        with pytest.raises(InputError):
            InputValidator.validate_matrix("1,0,0;0,1,0")

    def test_cusp(self) -> None:
        assert InputValidator.validate_cusp("inf") == Cusp.infinity()
        assert InputValidator.validate_cusp("2/4") == Cusp(1, 2)

    def test_kinds(self) -> None:
        assert InputValidator.validate_kinds(None) == ["manin", "distribution", "product-lift"]
        assert InputValidator.validate_kinds("manin, distribution") == ["manin", "distribution"]
        with pytest.raises(InputError):
            InputValidator.validate_kinds("steinberg")

    def test_suite(self) -> None:
        assert InputValidator.validate_suite("axioms") == "axioms"
        with pytest.raises(InputError):
            InputValidator.validate_suite("everything")

    def test_expand_params(self) -> None:
        params = InputValidator.validate_expand_params("ntheta", {"N": 4, "a": "1/2,0"})
        assert params == {"N": 4, "a": TorsionPoint.of("1/2", 0)}
        with pytest.raises(InputError):
            InputValidator.validate_expand_params("ntheta", {"N": 3, "a": "1/2,0"})
        with pytest.raises(InputError):
            InputValidator.validate_expand_params("eisenstein", {})
