"""Siegel units, the theta function and the torsion-shifted theta quotients."""

from collections.abc import Callable, Iterator
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
import math
from math import lcm
from typing import Literal

from ksl.config.settings import settings
from ksl.errors import InconclusiveError, InputError
from ksl.services.exactalg import (
    ONE,
    CycNumber,
    QExp,
    QExpComparison,
    TQExp,
    compare_qexp,
    exp_2pi_i,
    level_denom,
    order_at_one,
    tq_substitute,
    zeta,
)
from ksl.utils.helpers import as_fraction, frac_mod1, min_trunc
from ksl.utils.logging import logger

THETA_ENVELOPE = (Fraction(-1, 24), Fraction(0), Fraction(1, 2))
MAX_RELATIVE_STEPS = 64


@dataclass(frozen=True, order=True)
class TorsionPoint:
    """Point of Q^2/Z^2, stored by its representative in [0, 1)^2."""

    a1: Fraction
    a2: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "a1", frac_mod1(as_fraction(self.a1)))
        object.__setattr__(self, "a2", frac_mod1(as_fraction(self.a2)))

    @classmethod
    def of(cls, a1: Fraction | int | str, a2: Fraction | int | str) -> "TorsionPoint":
        return cls(as_fraction(a1), as_fraction(a2))

    @classmethod
    def zero(cls) -> "TorsionPoint":
        return cls(Fraction(0), Fraction(0))

    @property
    def level(self) -> int:
        return lcm(self.a1.denominator, self.a2.denominator)

    def is_zero(self) -> bool:
        return self.a1 == 0 and self.a2 == 0

    def __add__(self, other: "TorsionPoint") -> "TorsionPoint":
        return TorsionPoint(self.a1 + other.a1, self.a2 + other.a2)

    def __neg__(self) -> "TorsionPoint":
        return TorsionPoint(-self.a1, -self.a2)

    def __sub__(self, other: "TorsionPoint") -> "TorsionPoint":
        return TorsionPoint(self.a1 - other.a1, self.a2 - other.a2)

    def scale(self, k: int) -> "TorsionPoint":
        return TorsionPoint(self.a1 * k, self.a2 * k)

    def __str__(self) -> str:
        return f"({self.a1},{self.a2})"


def torsion_points(N: int, include_zero: bool = True) -> list[TorsionPoint]:
    """All points of (1/N)Z^2/Z^2 in lexicographic order."""
    if N < 1:
        raise InputError("level must be positive", "N")
    points = [TorsionPoint(Fraction(i, N), Fraction(j, N)) for i, j in product(range(N), repeat=2)]
    return [p for p in points if include_zero or not p.is_zero()]


def preimages(a: TorsionPoint, t: int) -> list[TorsionPoint]:
    """All b with t*b = a."""
    if t < 1:
        raise InputError("t must be positive", "t")
    return sorted(
        TorsionPoint((a.a1 + i) / t, (a.a2 + j) / t) for i, j in product(range(t), repeat=2)
    )


def bernoulli2(x: Fraction) -> Fraction:
    """B_2(x) = x^2 - x + 1/6."""
    return x * x - x + Fraction(1, 6)


@lru_cache(maxsize=512)
def siegel_unit(a: TorsionPoint, T: Fraction, level: int | None = None) -> QExp:
    """q-expansion of g_a known below q^T; g_0 = 1.

    ``level`` fixes the coefficient conductor and exponent grid (default: the
    level of a).
    """
    T = as_fraction(T)
    level = level or a.level
    if level % a.level:
        raise InputError(f"level {level} is not a multiple of the level of {a}", "level")
    grid = level_denom(level)
    if a.is_zero():
        return QExp.build({Fraction(0): ONE.embed(level)}, T, grid)
    lead = bernoulli2(a.a1) / 2
    relative = T - lead
    z = exp_2pi_i(a.a2).embed(level)
    z_inv = exp_2pi_i(-a.a2).embed(level)
    series = QExp.build({Fraction(0): ONE.embed(level)}, relative, grid)
    n = 0
    if a.a1 == 0:
        series = series.scale(ONE - z)
        n = 1
    while n + a.a1 < relative:
        series = series * QExp.build({Fraction(0): ONE, n + a.a1: -z}, None, grid)
        n += 1
    n = 1
    while n - a.a1 < relative:
        series = series * QExp.build({Fraction(0): ONE, n - a.a1: -z_inv}, None, grid)
        n += 1
    return series.shift(lead)


@lru_cache(maxsize=64)
def theta_series(T: Fraction) -> TQExp:
    """Theta(u, tau) = q^(1/12) (t^(1/2) - t^(-1/2)) prod (1 - q^n t)(1 - q^n / t), known below q^T."""
    T = as_fraction(T)
    half = Fraction(1, 2)
    twelfth = Fraction(1, 12)
    series = TQExp.build({(half, twelfth): ONE, (-half, twelfth): -ONE}, T)
    n = 1
    while twelfth + n < T:
        factor = TQExp.build(
            {(Fraction(0), Fraction(0)): ONE, (Fraction(1), Fraction(n)): -ONE, (Fraction(-1), Fraction(n)): -ONE, (Fraction(0), Fraction(2 * n)): ONE},
            None,
        )
        series = series * factor
        n += 1
    return TQExp.build(series.terms, T, 2, THETA_ENVELOPE)


def theta_at(r: Fraction | int, s: Fraction | int, T: Fraction, scale: int = 1) -> TQExp:
    """Theta(scale*u + r*tau + s) as a series in t = e^(2 pi i u)."""
    shifted = tq_substitute(theta_series(as_fraction(T)), r, s)
    return shifted.scale_t(scale) if scale != 1 else shifted


def theta_relative(r: Fraction | int, s: Fraction | int, relative: Fraction, scale: int = 1) -> TQExp:
    """Theta(scale*u + r*tau + s) known at least ``relative`` q-orders past its leading exponent.

    Substituting r*tau into Theta known below q^W leaves about (sqrt(W) - |r|/sqrt(2))^2
    orders past the leading term; the starting W comes from that estimate.
    """
    relative = as_fraction(relative)
    shift = abs(float(r))
    estimate = (math.sqrt(max(float(relative), 0.0)) + shift / math.sqrt(2)) ** 2
    working = max(relative + 1, Fraction(math.ceil(estimate)))
    achieved: Fraction | None = None
    for _ in range(MAX_RELATIVE_STEPS):
        shifted = theta_at(r, s, working, scale)
        lead = shifted.val()
        if shifted.trunc is None:
            return shifted
        if lead is not None:
            achieved = shifted.trunc - lead
            if achieved >= relative:
                return shifted
        working += 1
    raise InconclusiveError(f"Theta shifted by {r} tau: precision target not reached", "trunc", achieved, relative)


@dataclass(frozen=True, eq=False)
class ThetaQuotient:
    """A meromorphic two-variable function held as numerator / denominator."""

    num: TQExp
    den: TQExp

    def valuation(self) -> Fraction:
        """Leading q-exponent of the quotient."""
        num_val, den_val = self.num.val(), self.den.val()
        if num_val is None or den_val is None:
            raise InconclusiveError("quotient has no known terms", "trunc", None, None)
        return num_val - den_val

    def tau_shift(self) -> "ThetaQuotient":
        return ThetaQuotient(self.num.tau_shift(), self.den.tau_shift())

    def substitute(self, r: Fraction | int, s: Fraction | int) -> "ThetaQuotient":
        return ThetaQuotient(tq_substitute(self.num, r, s), tq_substitute(self.den, r, s))

    def power(self, k: int) -> "ThetaQuotient":
        return ThetaQuotient(self.num**k, self.den**k)


def ntheta_a(N: int, a: TorsionPoint, T: Fraction, power12: bool = False) -> ThetaQuotient:
    """_N Theta_a(u) = Theta(u - a1 tau - a2)^(N^2) / Theta(N(u - a1 tau - a2)), or its 12th power."""
    if N < 1:
        raise InputError("N must be positive", "N")
    if N % a.level:
        raise InputError(f"level of {a} does not divide {N}", "a")
    T = as_fraction(T)
    num = theta_at(-a.a1, -a.a2, T) ** (N * N)
    den = theta_at(-N * a.a1, -N * a.a2, T, scale=N)
    quotient = ThetaQuotient(num, den)
    return quotient.power(12) if power12 else quotient


# ---------------------------------------------------------------------------
# Formal identity checks
# ---------------------------------------------------------------------------


def working_truncs(target: Fraction) -> Iterator[Fraction]:
    """Working truncation orders tried for a relative precision target."""
    working = as_fraction(target)
    for _ in range(max(settings.max_trunc_rounds, 1)):
        yield working
        working = working + max(working / 2, Fraction(2))


def compare_tqexp(f: TQExp, g: TQExp, relative: Fraction) -> QExpComparison:
    """Three-valued comparison of two-variable series, precision relative to g's leading order."""
    diff = f - g
    common = min_trunc(f.trunc, g.trunc)
    if diff.terms:
        return QExpComparison(False, common, diff.val())
    lead = g.val()
    if common is not None and (lead is None or common - lead < relative):
        return QExpComparison(None, common)
    return QExpComparison(True, common)


def relative_compare(f: QExp, g: QExp, relative: Fraction) -> QExpComparison:
    lead = g.val()
    if lead is None:
        lead = f.val()
    return compare_qexp(f, g, None if lead is None else lead + relative)


def decide(
    name: str,
    target: Fraction,
    attempt: Callable[[Fraction], QExpComparison],
) -> bool:
    """Run attempt at growing working truncations until it decides."""
    last: QExpComparison | None = None
    for working in working_truncs(target):
        last = attempt(working)
        if not last.inconclusive:
            logger.debug("Identity decided", check=name, equal=last.equal, working_trunc=str(working))
            return bool(last.equal)
    raise InconclusiveError(
        f"{name}: precision target not reached", "trunc", None if last is None else last.common_trunc, target
    )


def transform_factor(r: int, s: int) -> tuple[CycNumber, Fraction, Fraction]:
    """(-1)^s (-t)^(-r) q^(-r^2/2) as (coefficient, t-exponent, q-exponent)."""
    sign = (-1) ** ((s + r) % 2)
    return CycNumber.rational(sign), Fraction(-r), Fraction(-r * r, 2)


def verify_transform(r: int, s: int, T: Fraction | int) -> bool:
    """Theta(u + r tau + s) = (-1)^s (-t)^(-r) q^(-r^2/2) Theta(u)."""
    cap = settings.transform_cap
    if abs(r) > cap or abs(s) > cap:
        raise InputError(f"|r|, |s| must not exceed {cap}", "r")
    target = as_fraction(T)
    coeff, t_exp, q_exp = transform_factor(r, s)

    def attempt(working: Fraction) -> QExpComparison:
        lhs = theta_relative(r, s, working)
        rhs = theta_relative(0, 0, working).mul_monomial(coeff, t_exp, q_exp)
        return compare_tqexp(lhs, rhs, target)

    return decide(f"transform({r},{s})", target, attempt)


def transform_monomial(r: int, s: int) -> TQExp:
    coeff, t_exp, q_exp = transform_factor(r, s)
    return TQExp.monomial(coeff, t_exp, q_exp)


def verify_transform_composition(cap: int | None = None) -> bool:
    """Factor(r1 + r2, s1 + s2) = Factor(r1, s1)(u + r2 tau + s2) * Factor(r2, s2) for |r|, |s| <= cap."""
    cap = settings.transform_cap if cap is None else cap
    span = range(-cap, cap + 1)
    for r1, s1, r2, s2 in product(span, repeat=4):
        composed = tq_substitute(transform_monomial(r1, s1), r2, s2) * transform_monomial(r2, s2)
        direct = transform_monomial(r1 + r2, s1 + s2)
        if (composed - direct).terms:
            logger.debug("Transform factors do not compose", r1=r1, s1=s1, r2=r2, s2=s2)
            return False
    return True


InvarianceGen =tuple[Literal["translate"], tuple[int, int]] | tuple[Literal["T"], None]


def epsilon(gen: InvarianceGen, N: int) -> CycNumber:
    """The character value: 1 on translations, e^(2 pi i (N^2 - 1)/12) on T."""
    if gen[0] == "translate":
        return ONE
    return zeta(12, N * N - 1)


def verify_invariance(gen: InvarianceGen, N: int, T: Fraction | int) -> bool:
    """_N Theta(g.(u, tau)) = epsilon(g) _N Theta(u, tau), checked by cross-multiplication."""
    target = as_fraction(T)
    eps = epsilon(gen, N)

    def attempt(working: Fraction) -> QExpComparison:
        # each factor carries its own truncation; products keep the smallest relative precision
        base = ThetaQuotient(theta_relative(0, 0, working) ** (N * N), theta_relative(0, 0, working, scale=N))
        if gen[0] == "translate":
            x1, x2 = gen[1]
            moved = ThetaQuotient(
                theta_relative(x1, x2, working) ** (N * N),
                theta_relative(N * x1, N * x2, working, scale=N),
            )
        else:
            moved = base.tau_shift()
        lhs = moved.num * base.den
        rhs = (base.num * moved.den).scale(eps)
        return compare_tqexp(lhs, rhs, target)

    return decide(f"invariance({gen[0]},N={N})", target, attempt)


def siegel_from_theta(a: TorsionPoint, T: Fraction) -> QExp:
    """-e^(pi i a2) q^(a1^2/2) Theta(a1 tau + a2)."""
    specialized = theta_at(a.a1, a.a2, T).specialize_t_one()
    return specialized.scale(-exp_2pi_i(a.a2 / 2)).shift(a.a1 * a.a1 / 2)


def verify_siegel_link(a: TorsionPoint, T: Fraction | int) -> bool:
    """g_a = -e^(pi i a2) q^(a1^2/2) Theta(a1 tau + a2, tau)."""
    if a.is_zero():
        raise InputError("the Siegel link needs a nonzero point", "a")
    target = as_fraction(T)

    def attempt(working: Fraction) -> QExpComparison:
        return relative_compare(siegel_from_theta(a, working), siegel_unit(a, working), target)

    return decide(f"siegel_link{a}", target, attempt)


def restriction_sign(a: TorsionPoint, b: TorsionPoint, N: int) -> int:
    """(-1)^(N(a1+a2+b1+b2) + N^2(a2+b2)) on representatives in [0, 1)."""
    exponent = N * (a.a1 + a.a2 + b.a1 + b.a2) + N * N * (a.a2 + b.a2)
    if exponent.denominator != 1:
        raise InputError("points must have level dividing N", "N")
    return -1 if exponent.numerator % 2 else 1


def restricted_quotient(a: TorsionPoint, b: TorsionPoint, N: int, T: Fraction) -> QExp:
    """(_N Theta_a / _N Theta_b) at u = 0.

    The simple zeros of the denominators cancel through
    Theta(N u - N a) = (-1)^(N a2) (-t^N)^(N a1) q^(-N^2 a1^2 / 2) Theta(N u).
    """
    p_a = theta_at(-a.a1, -a.a2, T).specialize_t_one() ** (N * N)
    p_b = theta_at(-b.a1, -b.a2, T).specialize_t_one() ** (N * N)
    sign_exp = N * (a.a1 + a.a2 + b.a1 + b.a2)
    sign = -1 if sign_exp.numerator % 2 else 1
    return (p_a * p_b.inv()).scale(sign).shift(N * N * (a.a1 * a.a1 - b.a1 * b.a1) / 2)


def verify_denominator_scaling(a: TorsionPoint, N: int, T: Fraction | int) -> bool:
    """Theta(N u - N a1 tau - N a2) = (-1)^(N a2) (-t^N)^(N a1) q^(-N^2 a1^2/2) Theta(N u)."""
    r, s = -N * a.a1, -N * a.a2
    if r.denominator != 1 or s.denominator != 1:
        raise InputError("level of a must divide N", "N")
    target = as_fraction(T)
    coeff, t_exp, q_exp = transform_factor(int(r), int(s))

    def attempt(working: Fraction) -> QExpComparison:
        lhs = theta_relative(r, s, working, scale=N)
        rhs = theta_relative(0, 0, working, scale=N).mul_monomial(coeff, t_exp * N, q_exp)
        return compare_tqexp(lhs, rhs, target)

    return decide(f"denominator_scaling{a},N={N}", target, attempt)


def verify_restriction(
    a: TorsionPoint,
    b: TorsionPoint,
    N: int,
    T: Fraction | int,
    powered: bool = True,
) -> bool:
    """(_N Theta_a / _N Theta_b)(0) = sign (g_a / g_b)^(N^2), and the 12th power without sign."""
    if a.is_zero() or b.is_zero() or a == b:
        raise InputError("restriction needs distinct nonzero points", "a")
    if N % a.level or N % b.level:
        raise InputError("levels must divide N", "N")
    target = as_fraction(T)
    sign = restriction_sign(a, b, N)

    if not (verify_denominator_scaling(a, N, target) and verify_denominator_scaling(b, N, target)):
        return False

    def unpowered(working: Fraction) -> QExpComparison:
        lhs = restricted_quotient(a, b, N, working)
        rhs = (siegel_unit(a, working) * siegel_unit(b, working).inv()) ** (N * N)
        return relative_compare(lhs, rhs.scale(sign), target)

    if not decide(f"restriction{a}{b},N={N}", target, unpowered):
        return False
    if not powered:
        return True

    def twelfth(working: Fraction) -> QExpComparison:
        lhs = restricted_quotient(a, b, N, working) ** 12
        rhs = (siegel_unit(a, working) * siegel_unit(b, working).inv()) ** (12 * N * N)
        return relative_compare(lhs, rhs, target)

    return decide(f"restriction12{a}{b},N={N}", target, twelfth)


def verify_restriction_shifted(
    a: TorsionPoint,
    b: TorsionPoint,
    x: TorsionPoint,
    N: int,
    T: Fraction | int,
) -> bool:
    """theta_a / theta_b restricted along the section x equals (g_(x-a) / g_(x-b))^(12 N^2)."""
    if x in (a, b):
        raise InputError("x must differ from a and b", "x")
    target = as_fraction(T)
    a_shift, b_shift = a - x, b - x

    def attempt(working: Fraction) -> QExpComparison:
        lhs = restricted_quotient(a_shift, b_shift, N, working) ** 12
        rhs = (siegel_unit(x - a, working) * siegel_unit(x - b, working).inv()) ** (12 * N * N)
        return relative_compare(lhs, rhs, target)

    return decide(f"restriction_shifted{a}{b}{x},N={N}", target, attempt)


def distribution_product(a: TorsionPoint, t: int, T: Fraction) -> QExp:
    """Product of g_b over the nonzero b with t*b = a."""
    result = QExp.one()
    for b in preimages(a, t):
        if not b.is_zero():
            result = result * siegel_unit(b, T)
    return result


def verify_distribution(a: TorsionPoint, t: int, T: Fraction | int) -> bool:
    """g_a = prod_(t b = a) g_b; at a = 0 the nonzero t-torsion product is the constant t."""
    target = as_fraction(T)

    def attempt(working: Fraction) -> QExpComparison:
        lhs = distribution_product(a, t, working)
        if a.is_zero():
            expected = QExp.monomial(t) if t > 1 else QExp.one()
            return compare_qexp(lhs, expected.truncate(lhs.trunc if lhs.trunc is not None else working), target)
        return relative_compare(lhs, siegel_unit(a, working), target)

    return decide(f"distribution{a},t={t}", target, attempt)


def negation_factor(a: TorsionPoint) -> CycNumber:
    """Root of unity c with g_(-a) = c g_a on representatives in [0, 1)^2."""
    if a.a1 != 0:
        return ONE
    return -exp_2pi_i(-a.a2)


def verify_negation(a: TorsionPoint, T: Fraction | int) -> bool:
    """g_(-a) = c g_a with c from negation_factor."""
    if a.is_zero():
        raise InputError("negation check needs a nonzero point", "a")
    target = as_fraction(T)

    def attempt(working: Fraction) -> QExpComparison:
        return relative_compare(siegel_unit(-a, working), siegel_unit(a, working).scale(negation_factor(a)), target)

    return decide(f"negation{a}", target, attempt)


def divisor_orders(N: int, a: TorsionPoint, T: Fraction | int) -> dict[TorsionPoint, int]:
    """Order of theta_a = (_N Theta_a)^12 at u = x for every x in A(N)."""
    working = as_fraction(T)
    orders: dict[TorsionPoint, int] = {}
    # Theta(N(u - a)) is a unit times Theta(N u) at every x; see verify_denominator_scaling
    den_order = _theta_order(lambda w: theta_series(w).scale_t(N), working)
    for x in torsion_points(N):
        d = x - a
        num_order = _theta_order(lambda w, d=d: theta_at(d.a1, d.a2, w), working)
        orders[x] = 12 * (N * N * num_order - den_order)
    return orders


def _theta_order(make: Callable[[Fraction], TQExp], start: Fraction) -> int:
    for working in working_truncs(start):
        series = make(working)
        if series.terms:
            return order_at_one(series)
    raise InconclusiveError("no known terms after substitution", "trunc", None, start)


def verify_divisor(N: int, a: TorsionPoint, T: Fraction | int) -> bool:
    """Orders are 12 N^2 - 12 at x = a, -12 elsewhere, and sum to zero."""
    orders = divisor_orders(N, a, T)
    expected = {x: (12 * N * N if x == a else 0) - 12 for x in orders}
    return orders == expected and sum(orders.values()) == 0
