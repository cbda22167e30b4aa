"""Floating-point evaluation of Theta, eta and Siegel units with tail bounds."""

from dataclasses import dataclass
from fractions import Fraction
import math

import numpy as np

from ksl.config.settings import settings
from ksl.errors import InconclusiveError, InputError
from ksl.services.thetasiegel import TorsionPoint, bernoulli2, siegel_unit
from ksl.utils.logging import logger

# |q| < 1/2 is needed for the geometric tail domination
MIN_IMAG_TAU = math.log(2) / (2 * math.pi)
DEFAULT_NMAX = 60


@dataclass(frozen=True)
class NumericResult:
    """A complex value together with an upper bound on its truncation error."""

    value: complex
    bound: float

    @property
    def relative_bound(self) -> float:
        magnitude = abs(self.value)
        return math.inf if magnitude == 0 else self.bound / magnitude


def _nome(tau: complex) -> complex:
    if tau.imag <= MIN_IMAG_TAU:
        raise InputError(f"Im(tau) must exceed ln 2 / (2 pi), got {tau.imag:.6g}", "tau")
    return complex(np.exp(2j * np.pi * tau))


def _check_nmax(nmax: int) -> None:
    if nmax < 1:
        raise InputError("nmax must be at least 1", "nmax")


def _product_tail(partial: complex, abs_q: float, spread: float, nmax: int) -> float:
    """Bound on |prod_(n > nmax)(1 + x_n) - 1| * |partial| with |x_n| <= spread |q|^n + |q|^(2n)."""
    tail = spread * abs_q ** (nmax + 1) / (1 - abs_q) + abs_q ** (2 * (nmax + 1)) / (1 - abs_q**2)
    return abs(partial) * math.expm1(tail)


def theta_num(u: complex, tau: complex, nmax: int = DEFAULT_NMAX) -> NumericResult:
    """Theta(u, tau) by the partial product through n = nmax."""
    _check_nmax(nmax)
    tau = complex(tau)
    u = complex(u)
    q = _nome(tau)
    t = complex(np.exp(2j * np.pi * u))
    n = np.arange(1, nmax + 1)
    qn = q**n
    factors = (1 - qn * t) * (1 - qn / t)
    prefactor = np.exp(2j * np.pi * tau / 12) * (np.exp(1j * np.pi * u) - np.exp(-1j * np.pi * u))
    value = complex(prefactor * np.prod(factors))
    abs_q = abs(q)
    spread = abs(t) + 1 / abs(t)
    # the tail bound only needs |q| < 1; early factors with |q t| > 1 are kept exactly in the partial product
    if spread * abs_q ** (nmax + 1) >= 1:
        raise InconclusiveError("nmax too small for this u: the tail does not contract", "nmax", nmax, None)
    return NumericResult(value, _product_tail(value, abs_q, spread, nmax))


def theta_prime_zero(tau: complex, nmax: int = DEFAULT_NMAX) -> NumericResult:
    """d/du Theta(u, tau) at u = 0, equal to 2 pi i q^(1/12) prod (1 - q^n)^2."""
    _check_nmax(nmax)
    tau = complex(tau)
    q = _nome(tau)
    qn = q ** np.arange(1, nmax + 1)
    value = complex(2j * np.pi * np.exp(2j * np.pi * tau / 12) * np.prod((1 - qn) ** 2))
    return NumericResult(value, _product_tail(value, abs(q), 2.0, nmax))


def eta_num(tau: complex, nmax: int = DEFAULT_NMAX) -> NumericResult:
    """Dedekind eta q^(1/24) prod (1 - q^n)."""
    _check_nmax(nmax)
    tau = complex(tau)
    q = _nome(tau)
    qn = q ** np.arange(1, nmax + 1)
    value = complex(np.exp(2j * np.pi * tau / 24) * np.prod(1 - qn))
    abs_q = abs(q)
    return NumericResult(value, abs(value) * math.expm1(abs_q ** (nmax + 1) / (1 - abs_q)))


def siegel_num(a: TorsionPoint, tau: complex, nmax: int = DEFAULT_NMAX) -> NumericResult:
    """g_a(tau) by the partial product; g_0 = 1."""
    _check_nmax(nmax)
    if a.is_zero():
        return NumericResult(1 + 0j, 0.0)
    tau = complex(tau)
    q = _nome(tau)
    a1, a2 = float(a.a1), float(a.a2)
    z = np.exp(2j * np.pi * a2)
    n = np.arange(0, nmax + 1)
    upper = np.prod(1 - q ** (n + a1) * z)
    lower = np.prod(1 - q ** (n[1:] - a1) / z)
    lead = np.exp(2j * np.pi * tau * float(bernoulli2(a.a1) / 2))
    value = complex(lead * upper * lower)
    abs_q = abs(q)
    spread = abs_q**a1 + abs_q ** (-a1)
    return NumericResult(value, _product_tail(value, abs_q, spread, nmax))


def _quotient_bound(num: NumericResult, num_power: int, den: NumericResult) -> float:
    r_num, r_den = num.relative_bound, den.relative_bound
    if r_den >= 1:
        return math.inf
    relative = (1 + r_num) ** num_power / (1 - r_den) - 1
    value = abs(num.value) ** num_power / abs(den.value)
    return value * relative


def ntheta_num(u: complex, tau: complex, N: int, nmax: int = DEFAULT_NMAX) -> NumericResult:
    """_N Theta(u, tau) = Theta(u)^(N^2) / Theta(N u)."""
    if N < 1:
        raise InputError("N must be positive", "N")
    num = theta_num(u, tau, nmax)
    den = theta_num(N * complex(u), tau, nmax)
    if den.value == 0:
        raise InputError("u is a pole of _N Theta", "u")
    value = num.value ** (N * N) / den.value
    return NumericResult(value, _quotient_bound(num, N * N, den))


def _s_image(u: complex, tau: complex) -> tuple[complex, complex]:
    tau = complex(tau)
    return -complex(u) / tau, -1 / tau


def _within(diff: float, bound: float, tol: float, scale: float, name: str) -> bool:
    allowed = tol * max(scale, 1.0)
    if bound > allowed:
        raise InconclusiveError(f"{name}: truncation bound exceeds tolerance", "tol", bound, allowed)
    logger.debug("Numeric comparison", check=name, difference=diff, bound=bound, allowed=allowed)
    return diff <= allowed + bound


def verify_S_transform(
    u: complex,
    tau: complex,
    N: int,
    tol: float | None = None,
    nmax: int = DEFAULT_NMAX,
) -> bool:
    """_N Theta(-u/tau, -1/tau) = i^(N^2 - 1) _N Theta(u, tau)."""
    tol = settings.tol if tol is None else tol
    u_s, tau_s = _s_image(u, tau)
    lhs = ntheta_num(u_s, tau_s, N, nmax)
    rhs = ntheta_num(u, tau, N, nmax)
    factor = 1j ** ((N * N - 1) % 4)
    diff = abs(lhs.value - factor * rhs.value)
    return _within(diff, lhs.bound + rhs.bound, tol, abs(rhs.value), f"S_transform(N={N})")


def psi_num(u: complex, tau: complex, nmax: int = DEFAULT_NMAX) -> complex:
    """psi(u, tau) = Theta(u/tau, -1/tau) / (e^(pi i u^2 / tau) Theta(u, tau)); the limit at u = 0."""
    tau = complex(tau)
    if u == 0:
        lhs = theta_prime_zero(-1 / tau, nmax).value / tau
        return lhs / theta_prime_zero(tau, nmax).value
    u = complex(u)
    lhs = theta_num(u / tau, -1 / tau, nmax).value
    rhs = complex(np.exp(1j * np.pi * u * u / tau)) * theta_num(u, tau, nmax).value
    return lhs / rhs


def verify_eta_psi(tau: complex, tol: float | None = None, nmax: int = DEFAULT_NMAX) -> bool:
    """eta(tau)^2 = (i/tau) eta(-1/tau)^2 and psi(0, tau) = -i."""
    tol = settings.tol if tol is None else tol
    tau = complex(tau)
    eta = eta_num(tau, nmax)
    eta_s = eta_num(-1 / tau, nmax)
    lhs = eta.value**2
    rhs = 1j / tau * eta_s.value**2
    bound = 3 * (eta.bound * abs(eta.value) + abs(1j / tau) * eta_s.bound * abs(eta_s.value))
    eta_ok = _within(abs(lhs - rhs), bound, tol, abs(lhs), "eta_functional_equation")
    psi = psi_num(0, tau, nmax)
    psi_ok = _within(abs(psi + 1j), 0.0, tol, 1.0, "psi_at_zero")
    return eta_ok and psi_ok


@dataclass(frozen=True)
class SnappedRoot:
    """Nearest order-th root of unity e^(2 pi i k / order) and the residual distance."""

    k: int
    order: int
    residual: float

    @property
    def exponent(self) -> Fraction:
        return Fraction(self.k, self.order)


def snap_root_of_unity(z: complex, order: int = 12) -> SnappedRoot:
    """Snap a numerically measured unit to the nearest order-th root of unity."""
    if order < 1:
        raise InputError("order must be positive", "order")
    if z == 0:
        raise InputError("zero is not near any root of unity", "z")
    angle = float(np.angle(z)) / (2 * np.pi)
    k = round(angle * order) % order
    root = complex(np.exp(2j * np.pi * k / order))
    return SnappedRoot(k, order, abs(z - root))


def measure_epsilon(
    generator: str,
    N: int,
    u: complex = 0.21 + 0.05j,
    tau: complex = 1.7j,
    nmax: int = DEFAULT_NMAX,
) -> SnappedRoot:
    """Numerically measured character value of T or S on _N Theta, snapped to mu_12."""
    base = ntheta_num(u, tau, N, nmax)
    if generator == "T":
        moved = ntheta_num(u, complex(tau) + 1, N, nmax)
    elif generator == "S":
        moved = ntheta_num(*_s_image(u, tau), N, nmax)
    else:
        raise InputError(f"unknown generator {generator!r}", "generator")
    return snap_root_of_unity(moved.value / base.value, 12)


def expected_epsilon(generator: str, N: int) -> int:
    """Exponent k with epsilon = e^(2 pi i k / 12)."""
    if generator == "T":
        return (N * N - 1) % 12
    if generator == "S":
        return (3 * (N * N - 1)) % 12
    raise InputError(f"unknown generator {generator!r}", "generator")


def check_layer_agreement(
    a: TorsionPoint,
    tau: complex,
    T: Fraction | int,
    tol: float | None = None,
    nmax: int = DEFAULT_NMAX,
) -> bool:
    """The exact q-expansion of g_a evaluated at tau matches the numeric product."""
    tol = settings.tol if tol is None else tol
    exact = siegel_unit(a, Fraction(T)).evaluate(complex(tau))
    numeric = siegel_num(a, tau, nmax)
    q_abs = abs(_nome(complex(tau)))
    # first unknown exponent of the truncated expansion dominates its error
    tail = abs(numeric.value) * q_abs ** float(Fraction(T) - bernoulli2(a.a1) / 2) * 4 if not a.is_zero() else 0.0
    diff = abs(exact - numeric.value)
    return _within(diff, numeric.bound + tail, tol, abs(numeric.value), f"layer_agreement{a}")
