"""Settings management for ksl."""

from fractions import Fraction

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="KSL_",
        case_sensitive=False
    )

    # Series precision
    trunc: str = "5"
    max_trunc_rounds: int = 4

    # Level caps
    level_cap: int = 8
    distribution_cap: int = 24
    transform_cap: int = 2

    # Reproducibility and tolerances
    seed: int = 0
    tol: float = 1e-9
    axiom_samples: int = 20

    # Parallelism
    jobs: int = 1

    # Logging configuration
    log_level: str = "WARNING"
    log_format: str = "console"

    @field_validator("trunc")
    @classmethod
    def _check_trunc(cls, value: str) -> str:
        try:
            parsed = Fraction(value)
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"trunc must be a rational number, got {value!r}") from e
        if parsed <= 0:
            raise ValueError("trunc must be positive")
        return value

    @field_validator("level_cap", "distribution_cap", "jobs", "axiom_samples")
    @classmethod
    def _check_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @field_validator("tol")
    @classmethod
    def _check_tol(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("tol must be positive")
        return value

    @property
    def trunc_value(self) -> Fraction:
        """Default truncation order as an exact rational."""
        return Fraction(self.trunc)


# Global settings instance
settings = Settings()
