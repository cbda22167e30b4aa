"""Shared fixtures for ksl tests."""

from collections.abc import Callable, Iterator
from fractions import Fraction

import pytest

from ksl.config.settings import settings


@pytest.fixture
def override_settings() -> Iterator[Callable[..., None]]:
    """Temporarily override attributes of the global settings."""
    saved: dict[str, object] = {}

    def apply(**values: object) -> None:
        for key, value in values.items():
            saved.setdefault(key, getattr(settings, key))
            setattr(settings, key, value)

    yield apply
    for key, value in saved.items():
        setattr(settings, key, value)


@pytest.fixture
def trunc() -> Fraction:
    """Default precision target for formal identity checks in tests."""
    return Fraction(3)
