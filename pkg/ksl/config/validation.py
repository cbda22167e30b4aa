"""Input validation utilities for ksl."""

from fractions import Fraction
from pathlib import Path
import re
from typing import Any, get_args

from pydantic import BaseModel

from ksl.errors import InputError
from ksl.services.distrib import TestFn
from ksl.services.ksymbol import RELATOR_KINDS, RelatorKind
from ksl.services.modsym import Cusp
from ksl.services.thetasiegel import TorsionPoint

SUITES = ("theta", "siegel", "numeric", "residue", "manin", "cocycle", "mu", "modsym", "axioms")
EXPAND_KINDS = ("siegel", "theta", "ntheta")

_RATIONAL = re.compile(r"^\s*[-+]?\d+(\s*/\s*\d+)?\s*$")


class ArithmeticValidationMixin:
    """Parsers for rationals, torsion points and matrices."""

    @staticmethod
    def validate_rational(text: str, field: str = "value") -> Fraction:
        """Parse 'p/q' or an integer."""
        if not _RATIONAL.match(text):
            raise InputError(f"not a rational number: {text!r}", field)
        try:
            return Fraction(text.replace(" ", ""))
        except ZeroDivisionError as e:
            raise InputError(f"zero denominator in {text!r}", field) from e

    @staticmethod
    def validate_point(text: str) -> TorsionPoint:
        """Parse 'p/q,p/q' into a torsion point."""
        parts = text.split(",")
        if len(parts) != 2:
            raise InputError(f"torsion point needs two coordinates: {text!r}", "point")
        a1, a2 = (ArithmeticValidationMixin.validate_rational(p, "point") for p in parts)
        return TorsionPoint.of(a1, a2)

    @staticmethod
    def validate_matrix(text: str) -> tuple[tuple[Fraction, ...], ...]:
        """Parse '1,0;0,1' into a square matrix of rationals."""
        rows = [row for row in text.split(";") if row.strip()]
        if not rows:
            raise InputError("empty matrix", "matrix")
        matrix = tuple(
            tuple(ArithmeticValidationMixin.validate_rational(v, "matrix") for v in row.split(","))
            for row in rows
        )
        if any(len(row) != len(matrix) for row in matrix):
            raise InputError(f"matrix must be square: {text!r}", "matrix")
        return matrix

    @staticmethod
    def validate_level(N: int, minimum: int = 1) -> int:
        """Levels are positive integers, at least minimum."""
        if N < minimum:
            raise InputError(f"level must be at least {minimum}, got {N}", "N")
        return N


class SymbolValidationMixin:
    """Validation for cusps, suites, relator kinds and JSON inputs."""

    @staticmethod
    def validate_cusp(text: str) -> Cusp:
        return Cusp.parse(text)

    @staticmethod
    def validate_suite(name: str) -> str:
        if name not in SUITES:
            raise InputError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}", "suite")
        return name

    @staticmethod
    def validate_kinds(text: str | None) -> list[RelatorKind]:
        """Comma separated relator kinds; all kinds when empty."""
        if not text:
            return list(RELATOR_KINDS)
        kinds = [k.strip() for k in text.split(",") if k.strip()]
        allowed = get_args(RelatorKind)
        for kind in kinds:
            if kind not in allowed:
                raise InputError(f"unknown relator kind {kind!r}", "kinds")
        return kinds  # type: ignore[return-value]

    @staticmethod
    def load_test_fn(path: str) -> TestFn:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise InputError(f"cannot read test function from {path}: {e}", "testfn") from e
        return TestFn.from_json(text)


class InputValidator(BaseModel, ArithmeticValidationMixin, SymbolValidationMixin):
    """Main input validator class."""

    @classmethod
    def validate_expand_params(cls, kind: str, params: dict[str, Any]) -> dict[str, Any]:
        """Validate the parameters of an expand request."""
        if kind not in EXPAND_KINDS:
            raise InputError(f"unknown series kind {kind!r}", "kind")
        validated: dict[str, Any] = {}
        if kind == "siegel":
            coords = params.get("coords") or []
            if len(coords) != 2:
                raise InputError("siegel needs two coordinates a1 a2", "a")
            validated["a"] = TorsionPoint.of(*(cls.validate_rational(c, "a") for c in coords))
        elif kind == "ntheta":
            if params.get("N") is None:
                raise InputError("ntheta needs --N", "N")
            validated["N"] = cls.validate_level(params["N"])
            a = params.get("a")
            validated["a"] = cls.validate_point(a) if a else TorsionPoint.zero()
            if validated["N"] % validated["a"].level:
                raise InputError(f"level of {validated['a']} does not divide N", "a")
        return validated
