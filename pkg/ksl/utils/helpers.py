"""Helper utilities for ksl."""

from collections.abc import Iterable
from fractions import Fraction
from functools import reduce
from math import gcd, lcm
import random
from typing import Any

from ksl.config.settings import settings


def as_fraction(value: Any) -> Fraction:
    """Convert ints, strings, Fractions and sympy/QQ rationals to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if hasattr(value, "p") and hasattr(value, "q"):
        # sympy Rational
        return Fraction(int(value.p), int(value.q))
    return Fraction(int(value.numerator), int(value.denominator))


def denominator_lcm(values: Iterable[Fraction]) -> int:
    """Least common multiple of the denominators (1 for an empty input)."""
    return reduce(lcm, (v.denominator for v in values), 1)


def rational_lcm(values: Iterable[Fraction]) -> Fraction:
    """Positive generator of the intersection of the cyclic groups v·Z."""
    items = [abs(v) for v in values if v != 0]
    if not items:
        raise ValueError("rational_lcm needs at least one nonzero value")
    numerators = reduce(lcm, (v.numerator for v in items))
    denominators = reduce(gcd, (v.denominator for v in items))
    return Fraction(numerators, denominators)


def frac_mod1(value: Fraction) -> Fraction:
    """Representative of value modulo Z in [0, 1)."""
    return value - (value.numerator // value.denominator)


def format_fraction(value: Fraction) -> str:
    """Render a rational as 'p/q', or 'p' when integral."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def seeded_rng(seed: int | None = None) -> random.Random:
    """Deterministic random generator for reproducible batteries."""
    return random.Random(settings.seed if seed is None else seed)


def min_trunc(*truncs: Fraction | None) -> Fraction | None:
    """Minimum of truncation orders where None stands for an exact series."""
    finite = [t for t in truncs if t is not None]
    return min(finite) if finite else None
