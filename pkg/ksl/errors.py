"""Exception hierarchy for ksl."""

from typing import Any


class KslError(Exception):
    """Base class for all ksl errors."""


class InputError(KslError, ValueError):
    """Malformed or out-of-domain input (CLI misuse, bad points, r = s)."""

    def __init__(self, message: str, field: str | None = None):
        self.message = message
        self.field = field
        super().__init__(f"[{field}] {message}" if field else message)


class ArithmeticFailure(KslError, ArithmeticError):
    """Exact arithmetic could not be carried out (zero inversion, bad embedding)."""


class InconclusiveError(KslError):
    """A comparison ran out of precision before it could decide."""

    def __init__(
        self,
        message: str,
        parameter: str = "trunc",
        achieved: Any = None,
        required: Any = None,
    ):
        self.message = message
        self.parameter = parameter
        self.achieved = achieved
        self.required = required
        super().__init__(
            f"{message} ({parameter}: achieved {achieved}, required {required})"
        )


class CertificateError(KslError):
    """A span-membership certificate or identity check failed."""

    def __init__(self, message: str, witness: Any = None):
        self.message = message
        self.witness = witness
        super().__init__(message)
