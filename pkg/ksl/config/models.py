"""Pydantic models for ksl reports and JSON interchange."""

from datetime import datetime
from enum import Enum
from fractions import Fraction

from pydantic import BaseModel, Field, field_validator


class CheckStatus(str, Enum):
    """Outcome of a single verification check."""

    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


class CheckResult(BaseModel):
    """Result of one check inside a suite."""

    suite: str
    name: str
    anchor: str
    status: CheckStatus
    detail: str | None = None
    duration_ms: float = 0.0
    limiting_parameter: str | None = None


class SuiteReport(BaseModel):
    """Machine-readable report of a suite run."""

    suite: str
    results: list[CheckResult] = Field(default_factory=list)
    started_at: datetime = Field(default_factory=datetime.now)
    finished_at: datetime | None = None

    @property
    def passed(self) -> int:
        return sum(1 for r in self.results if r.status == CheckStatus.PASS)

    @property
    def failed(self) -> int:
        return sum(1 for r in self.results if r.status == CheckStatus.FAIL)

    @property
    def inconclusive(self) -> int:
        return sum(1 for r in self.results if r.status == CheckStatus.INCONCLUSIVE)

    @property
    def exit_code(self) -> int:
        """0 when everything passed, 1 on any failure, 3 when only precision ran short."""
        if self.failed:
            return 1
        if self.inconclusive:
            return 3
        return 0


def _check_rational(value: str) -> str:
    try:
        Fraction(value)
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"not a rational number: {value!r}") from e
    return value


class KnSymTermModel(BaseModel):
    """One term of a symbol: a rational coefficient and its atoms."""

    coef: str
    atoms: list[list[int]] = Field(description="[a1_num, a1_den, a2_num, a2_den] per atom")

    @field_validator("coef")
    @classmethod
    def _coef(cls, value: str) -> str:
        return _check_rational(value)

    @field_validator("atoms")
    @classmethod
    def _atoms(cls, value: list[list[int]]) -> list[list[int]]:
        for atom in value:
            if len(atom) != 4 or atom[1] <= 0 or atom[3] <= 0:
                raise ValueError(f"atom must be [num, den, num, den] with positive denominators: {atom}")
        return value


class KnSymModel(BaseModel):
    """JSON form of a K-symbol."""

    n: int = Field(ge=1)
    level: int = Field(ge=1)
    terms: list[KnSymTermModel] = Field(default_factory=list)


class TestFnTermModel(BaseModel):
    """One coset indicator with an integer coefficient."""

    __test__ = False

    coef: int
    shift: list[str]
    lattice: list[list[str]]

    @field_validator("shift")
    @classmethod
    def _shift(cls, value: list[str]) -> list[str]:
        return [_check_rational(v) for v in value]

    @field_validator("lattice")
    @classmethod
    def _lattice(cls, value: list[list[str]]) -> list[list[str]]:
        return [[_check_rational(v) for v in row] for row in value]


class TestFnModel(BaseModel):
    """JSON form of a lattice-coset test function."""

    __test__ = False

    dim: int = Field(ge=1)
    terms: list[TestFnTermModel] = Field(default_factory=list)


class DivisorTermModel(BaseModel):
    """A cusp with its multiplicity."""

    cusp: str
    coef: int


class DivisorModel(BaseModel):
    """JSON form of a degree-zero cusp divisor."""

    terms: list[DivisorTermModel] = Field(default_factory=list)


class RelatorDumpModel(BaseModel):
    """A generated relator set together with its rank over Q."""

    level: int
    n: int
    kinds: list[str]
    count: int
    rank: int
    tags: list[str] = Field(default_factory=list)
    relators: list[KnSymModel] = Field(default_factory=list)
