"""Exact cyclotomic coefficients and truncated q- and (t, q)-series."""

from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
import cmath
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd, lcm
from typing import Any, Literal

from sympy import cyclotomic_poly, totient
from sympy.polys.densearith import (
    dup_add,
    dup_mul,
    dup_mul_ground,
    dup_neg,
    dup_rem,
    dup_sub,
)
from sympy.polys.densebasic import dup_strip
from sympy.polys.domains import QQ
from sympy.polys.euclidtools import dup_invert

from ksl.errors import ArithmeticFailure, InconclusiveError, InputError
from ksl.utils.helpers import as_fraction, denominator_lcm, format_fraction, min_trunc

Envelope = tuple[Fraction, Fraction, Fraction]


@lru_cache(maxsize=None)
def _phi(conductor: int) -> tuple[Any, ...]:
    """Dense coefficients (highest first) of the cyclotomic polynomial."""
    poly = cyclotomic_poly(conductor, polys=True)
    return tuple(QQ(int(c)) for c in poly.all_coeffs())


@lru_cache(maxsize=None)
def phi_degree(conductor: int) -> int:
    """Euler totient of the conductor."""
    return int(totient(conductor))


def _qq(value: Fraction | int) -> Any:
    value = as_fraction(value)
    return QQ(value.numerator, value.denominator)


def _to_fraction(value: Any) -> Fraction:
    return Fraction(int(QQ.numer(value)), int(QQ.denom(value)))


@dataclass(frozen=True, eq=False)
class CycNumber:
    """Element of Q(zeta_L) as a reduced polynomial in zeta_L.

    ``rep`` holds the dense coefficients (highest degree first) of the unique
    remainder modulo the L-th cyclotomic polynomial.
    """

    conductor: int
    rep: tuple[Any, ...]

    @classmethod
    def from_dense(cls, conductor: int, poly: Sequence[Any]) -> "CycNumber":
        """Reduce an arbitrary dense polynomial in zeta_L."""
        if conductor < 1:
            raise InputError("conductor must be positive", "conductor")
        rem = dup_rem(dup_strip(list(poly)), list(_phi(conductor)), QQ)
        return cls(conductor, tuple(rem))

    @classmethod
    def from_coeffs(cls, conductor: int, coeffs: Sequence[Fraction | int]) -> "CycNumber":
        """Build from ascending coefficients c_0 + c_1 z + ... ."""
        return cls.from_dense(conductor, [_qq(c) for c in reversed(list(coeffs))])

    @classmethod
    def rational(cls, value: Fraction | int) -> "CycNumber":
        """Embed a rational number (conductor 1)."""
        value = as_fraction(value)
        return cls(1, (_qq(value),) if value else ())

    @classmethod
    def coerce(cls, value: "CycNumber | Fraction | int") -> "CycNumber":
        if isinstance(value, CycNumber):
            return value
        return cls.rational(value)

    @property
    def coeffs(self) -> tuple[Fraction, ...]:
        """Ascending rational coefficients, exactly phi(L) of them."""
        ascending = [_to_fraction(c) for c in reversed(self.rep)]
        return tuple(ascending + [Fraction(0)] * (phi_degree(self.conductor) - len(ascending)))

    def is_zero(self) -> bool:
        return not self.rep

    def is_rational(self) -> bool:
        return len(self.rep) <= 1

    def rational_value(self) -> Fraction:
        """The value as a rational; fails for irrational elements."""
        if not self.is_rational():
            raise ArithmeticFailure(f"{self} is not rational")
        return _to_fraction(self.rep[0]) if self.rep else Fraction(0)

    def embed(self, target: int) -> "CycNumber":
        """Re-express in Q(zeta_target), target a multiple of the conductor."""
        if target % self.conductor:
            raise ArithmeticFailure(
                f"cannot embed conductor {self.conductor} into {target}"
            )
        if target == self.conductor or self.is_rational():
            return CycNumber(target, self.rep) if self.is_rational() else self
        step = target // self.conductor
        degree = len(self.rep) - 1
        dense: list[Any] = [QQ(0)] * (degree * step + 1)
        for i, c in enumerate(self.rep):
            dense[i * step] = c
        return CycNumber.from_dense(target, dense)

    def _aligned(self, other: "CycNumber") -> tuple["CycNumber", "CycNumber", int]:
        if self.conductor == other.conductor:
            return self, other, self.conductor
        target = lcm(self.conductor, other.conductor)
        return self.embed(target), other.embed(target), target

    def __add__(self, other: "CycNumber | Fraction | int") -> "CycNumber":
        other = CycNumber.coerce(other)
        x, y, L = self._aligned(other)
        return CycNumber(L, tuple(dup_add(list(x.rep), list(y.rep), QQ)))

    __radd__ = __add__

    def __neg__(self) -> "CycNumber":
        return CycNumber(self.conductor, tuple(dup_neg(list(self.rep), QQ)))

    def __sub__(self, other: "CycNumber | Fraction | int") -> "CycNumber":
        other = CycNumber.coerce(other)
        x, y, L = self._aligned(other)
        return CycNumber(L, tuple(dup_sub(list(x.rep), list(y.rep), QQ)))

    def __rsub__(self, other: "CycNumber | Fraction | int") -> "CycNumber":
        return CycNumber.coerce(other) - self

    def __mul__(self, other: "CycNumber | Fraction | int") -> "CycNumber":
        other = CycNumber.coerce(other)
        if not self.rep or not other.rep:
            return CycNumber(lcm(self.conductor, other.conductor), ())
        if other.is_rational():
            target = lcm(self.conductor, other.conductor)
            base = self.embed(target)
            return CycNumber(target, tuple(dup_mul_ground(list(base.rep), other.rep[0], QQ)))
        if self.is_rational():
            return other * self
        x, y, L = self._aligned(other)
        return CycNumber.from_dense(L, dup_mul(list(x.rep), list(y.rep), QQ))

    __rmul__ = __mul__

    def inv(self) -> "CycNumber":
        """Multiplicative inverse via the extended Euclidean algorithm."""
        if not self.rep:
            raise ArithmeticFailure("inversion of zero")
        if self.is_rational():
            return CycNumber(self.conductor, (QQ(1) / self.rep[0],))
        inverse = dup_invert(list(self.rep), list(_phi(self.conductor)), QQ)
        return CycNumber.from_dense(self.conductor, inverse)

    def __truediv__(self, other: "CycNumber | Fraction | int") -> "CycNumber":
        return self * CycNumber.coerce(other).inv()

    def __pow__(self, exponent: int) -> "CycNumber":
        if exponent < 0:
            return self.inv() ** (-exponent)
        result = CycNumber(self.conductor, (QQ(1),))
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def __eq__(self, other: object) -> bool:
        if isinstance(other, int | Fraction):
            other = CycNumber.rational(other)
        if not isinstance(other, CycNumber):
            return NotImplemented
        x, y, _ = self._aligned(other)
        return x.rep == y.rep

    __hash__ = None  # type: ignore[assignment]

    def to_complex(self) -> complex:
        """Numerical value with zeta_L = exp(2 pi i / L)."""
        z = cmath.exp(2j * cmath.pi / self.conductor)
        return sum((float(c) * z**k for k, c in enumerate(self.coeffs)), 0j)

    def format(self, conductor: int | None = None) -> str:
        """Render as 'c0 + c1*z + c2*z^2' in zeta of the given conductor."""
        value = self.embed(conductor) if conductor else self
        parts: list[str] = []
        for k, c in enumerate(value.coeffs):
            if c == 0:
                continue
            text = format_fraction(c)
            if k == 0:
                parts.append(text)
            elif k == 1:
                parts.append(f"{text}*z")
            else:
                parts.append(f"{text}*z^{k}")
        return " + ".join(parts) if parts else "0"

    def __str__(self) -> str:
        return self.format()

    def __repr__(self) -> str:
        return f"CycNumber({self.conductor}: {self.format()})"


ONE = CycNumber.rational(1)
ZERO = CycNumber.rational(0)


@lru_cache(maxsize=4096)
def zeta(L: int, k: int) -> CycNumber:
    """zeta_L ** k, reduced."""
    if L < 1:
        raise InputError("zeta needs a positive conductor", "L")
    k %= L
    if k == 0:
        return CycNumber(L, (QQ(1),))
    return CycNumber.from_dense(L, [QQ(1)] + [QQ(0)] * k)


def exp_2pi_i(x: Fraction) -> CycNumber:
    """e^(2 pi i x) for rational x."""
    x = as_fraction(x)
    return zeta(x.denominator, x.numerator)


def parse_cyc(text: str, conductor: int) -> CycNumber:
    """Inverse of CycNumber.format for a fixed conductor."""
    text = text.strip()
    if text == "0":
        return CycNumber(conductor, ())
    coeffs: dict[int, Fraction] = {}
    try:
        for part in text.split(" + "):
            part = part.strip()
            if "*z" in part:
                coef_text, power_text = part.split("*z", 1)
                power = int(power_text[1:]) if power_text.startswith("^") else 1
            else:
                coef_text, power = part, 0
            coeffs[power] = coeffs.get(power, Fraction(0)) + Fraction(coef_text)
    except (ValueError, ZeroDivisionError) as e:
        raise InputError(f"cannot parse cyclotomic number {text!r}", "coefficient") from e
    width = max(coeffs) + 1
    return CycNumber.from_coeffs(conductor, [coeffs.get(k, Fraction(0)) for k in range(width)])


def cyc_arith(
    op: Literal["add", "mul", "inv", "embed"],
    x: CycNumber,
    y: "CycNumber | int | None" = None,
) -> CycNumber:
    """Dispatch an arithmetic operation on cyclotomic numbers."""
    if op == "add":
        return x + CycNumber.coerce(_require(y))
    if op == "mul":
        return x * CycNumber.coerce(_require(y))
    if op == "inv":
        return x.inv()
    if op == "embed":
        if not isinstance(y, int):
            raise InputError("embed needs a target conductor", "target")
        return x.embed(y)
    raise InputError(f"unknown operation {op!r}", "op")


def _require(value: Any) -> Any:
    if value is None:
        raise InputError("missing second operand", "y")
    return value


def _common_conductor(coeffs: Iterable[CycNumber]) -> int:
    result = 1
    for c in coeffs:
        result = lcm(result, c.conductor)
    return result


# ---------------------------------------------------------------------------
# One-variable truncated Puiseux series in q
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QExp:
    """Truncated q-series with exponents in (1/denom)Z.

    Terms with exponent >= trunc are unknown; ``trunc=None`` marks an exact
    (finite) series.
    """

    terms: Mapping[Fraction, CycNumber]
    trunc: Fraction | None = None
    denom: int = 1

    def __post_init__(self) -> None:
        for e, c in self.terms.items():
            if c.is_zero():
                raise InputError("zero coefficient stored", "terms")
            if self.denom % e.denominator:
                raise InputError(f"exponent {e} off the 1/{self.denom} grid", "denom")
            if self.trunc is not None and e >= self.trunc:
                raise InputError(f"exponent {e} at or beyond trunc {self.trunc}", "trunc")

    @classmethod
    def build(
        cls,
        terms: Mapping[Fraction, CycNumber],
        trunc: Fraction | None,
        denom: int = 1,
    ) -> "QExp":
        """Drop zero and out-of-range terms and fit the grid to the exponents."""
        kept = {
            e: c
            for e, c in terms.items()
            if not c.is_zero() and (trunc is None or e < trunc)
        }
        return cls(kept, trunc, lcm(denom, denominator_lcm(kept)))

    @classmethod
    def monomial(
        cls, coeff: "CycNumber | Fraction | int", exponent: Fraction | int = 0
    ) -> "QExp":
        return cls.build({as_fraction(exponent): CycNumber.coerce(coeff)}, None)

    @classmethod
    def one(cls) -> "QExp":
        return cls.monomial(1)

    def is_exact(self) -> bool:
        return self.trunc is None

    def val(self) -> Fraction | None:
        """Smallest stored exponent."""
        return min(self.terms) if self.terms else None

    def leading(self) -> tuple[Fraction, CycNumber]:
        if not self.terms:
            raise ArithmeticFailure("series has no known terms")
        e = min(self.terms)
        return e, self.terms[e]

    def coeff(self, exponent: Fraction | int) -> CycNumber:
        exponent = as_fraction(exponent)
        if self.trunc is not None and exponent >= self.trunc:
            raise InconclusiveError(
                "coefficient beyond truncation", "trunc", self.trunc, exponent
            )
        return self.terms.get(exponent, ZERO)

    def truncate(self, trunc: Fraction | int) -> "QExp":
        return QExp.build(self.terms, min_trunc(self.trunc, as_fraction(trunc)), self.denom)

    def __add__(self, other: "QExp") -> "QExp":
        out: dict[Fraction, CycNumber] = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out[e] + c if e in out else c
        return QExp.build(out, min_trunc(self.trunc, other.trunc), lcm(self.denom, other.denom))

    def __neg__(self) -> "QExp":
        return QExp({e: -c for e, c in self.terms.items()}, self.trunc, self.denom)

    def __sub__(self, other: "QExp") -> "QExp":
        return self + (-other)

    def scale(self, c: "CycNumber | Fraction | int") -> "QExp":
        c = CycNumber.coerce(c)
        return QExp.build({e: v * c for e, v in self.terms.items()}, self.trunc, self.denom)

    def shift(self, exponent: Fraction | int) -> "QExp":
        """Multiply by q**exponent."""
        exponent = as_fraction(exponent)
        trunc = None if self.trunc is None else self.trunc + exponent
        return QExp.build({e + exponent: c for e, c in self.terms.items()}, trunc, self.denom)

    def _mul_trunc(self, other: "QExp") -> Fraction | None:
        v_self = self.val() if self.terms else self.trunc
        v_other = other.val() if other.terms else other.trunc
        candidates: list[Fraction] = []
        if self.trunc is not None and v_other is not None:
            candidates.append(self.trunc + v_other)
        if other.trunc is not None and v_self is not None:
            candidates.append(other.trunc + v_self)
        return min(candidates) if candidates else None

    def __mul__(self, other: "QExp | CycNumber | Fraction | int") -> "QExp":
        if not isinstance(other, QExp):
            return self.scale(other)
        if (not self.terms and self.is_exact()) or (not other.terms and other.is_exact()):
            return QExp({}, None, 1)
        trunc = self._mul_trunc(other)
        left = sorted(self.terms.items())
        right = sorted(other.terms.items())
        out: dict[Fraction, CycNumber] = {}
        for e1, c1 in left:
            for e2, c2 in right:
                e = e1 + e2
                if trunc is not None and e >= trunc:
                    break
                product = c1 * c2
                out[e] = out[e] + product if e in out else product
        return QExp.build(out, trunc, lcm(self.denom, other.denom))

    def inv(self, trunc: Fraction | int | None = None) -> "QExp":
        """Multiplicative inverse; exact inputs need an explicit result trunc."""
        v, lead = self.leading()
        lead_inv = lead.inv()
        if self.trunc is None:
            if len(self.terms) == 1 and trunc is None:
                return QExp.build({-v: lead_inv}, None, self.denom)
            if trunc is None:
                raise ArithmeticFailure("inverse of an exact series needs a truncation order")
            relative = as_fraction(trunc) + v
        else:
            relative = self.trunc - v
            if trunc is not None:
                relative = min(relative, as_fraction(trunc) + v)
        # 1/(1 + h) by the recursive coefficient formula on the grid of h
        tail = {e - v: c * lead_inv for e, c in self.terms.items() if e != v}
        grid = lcm(self.denom, denominator_lcm(tail))
        steps = {int(e * grid): c for e, c in tail.items()}
        step = 0
        for k in steps:
            step = gcd(step, k)
        series: dict[int, CycNumber] = {0: ONE}
        if step:
            m = step
            while Fraction(m, grid) < relative:
                acc = ZERO
                for k, c in steps.items():
                    if k <= m and (m - k) in series:
                        acc = acc + c * series[m - k]
                if not acc.is_zero():
                    series[m] = -acc
                m += step
        result = {Fraction(m, grid) - v: c * lead_inv for m, c in series.items()}
        return QExp.build(result, relative - v, grid)

    def __truediv__(self, other: "QExp") -> "QExp":
        return self * other.inv()

    def __pow__(self, exponent: int) -> "QExp":
        if exponent < 0:
            return self.inv() ** (-exponent)
        result = QExp.one()
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    def tau_shift(self) -> "QExp":
        """tau -> tau + 1: multiply the q^e coefficient by e^(2 pi i e)."""
        return QExp.build(
            {e: c * exp_2pi_i(e) for e, c in self.terms.items()}, self.trunc, self.denom
        )

    def conductor(self) -> int:
        return _common_conductor(self.terms.values())

    def evaluate(self, tau: complex) -> complex:
        """Sum of the known terms at q = exp(2 pi i tau)."""
        return sum(
            (c.to_complex() * cmath.exp(2j * cmath.pi * float(e) * tau) for e, c in self.terms.items()),
            0j,
        )

    def __repr__(self) -> str:
        return f"QExp(terms={len(self.terms)}, val={self.val()}, trunc={self.trunc})"


@dataclass(frozen=True)
class QExpComparison:
    """Outcome of a three-valued series comparison."""

    equal: bool | None
    common_trunc: Fraction | None
    first_difference: Fraction | None = None

    @property
    def inconclusive(self) -> bool:
        return self.equal is None


def compare_qexp(f: QExp, g: QExp, t_min: Fraction | int | None = None) -> QExpComparison:
    """Compare two series: unequal, equal to the common truncation, or inconclusive."""
    diff = f - g
    common = min_trunc(f.trunc, g.trunc)
    if diff.terms:
        return QExpComparison(False, common, diff.val())
    if t_min is not None and common is not None and common < as_fraction(t_min):
        return QExpComparison(None, common)
    return QExpComparison(True, common)


def qexp_eq(f: QExp, g: QExp, t_min: Fraction | int) -> bool:
    """True iff f = g to at least t_min; raises InconclusiveError otherwise."""
    result = compare_qexp(f, g, t_min)
    if result.equal is None:
        raise InconclusiveError(
            "series agree only below the requested order", "trunc", result.common_trunc, t_min
        )
    return result.equal


def qexp_arith(
    op: Literal["add", "mul", "inv", "truncate"],
    f: "QExp | TQExp",
    g: "QExp | TQExp | Fraction | int | None" = None,
) -> "QExp | TQExp":
    """Dispatch an arithmetic operation on one- or two-variable series."""
    if op == "add":
        return f + _require(g)  # type: ignore[operator]
    if op == "mul":
        return f * _require(g)  # type: ignore[operator]
    if op == "inv":
        if isinstance(f, TQExp):
            raise ArithmeticFailure("two-variable series are inverted as quotients")
        return f.inv(g if isinstance(g, Fraction | int) else None)
    if op == "truncate":
        return f.truncate(_require(g))  # type: ignore[arg-type]
    raise InputError(f"unknown operation {op!r}", "op")


def serialize_qexp(f: QExp) -> str:
    """Text form: a header line then 'p/q : poly' lines sorted by exponent."""
    conductor = f.conductor()
    trunc = "exact" if f.trunc is None else format_fraction(f.trunc)
    lines = [f"conductor {conductor}, trunc {trunc}"]
    for e in sorted(f.terms):
        lines.append(f"{format_fraction(e)} : {f.terms[e].format(conductor)}")
    return "\n".join(lines) + "\n"


def parse_qexp(text: str) -> QExp:
    """Inverse of serialize_qexp."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise InputError("empty series text", "text")
    header = lines[0].strip()
    try:
        conductor_part, trunc_part = (p.strip() for p in header.split(","))
        conductor = int(conductor_part.removeprefix("conductor").strip())
        trunc_text = trunc_part.removeprefix("trunc").strip()
        trunc = None if trunc_text == "exact" else Fraction(trunc_text)
    except ValueError as e:
        raise InputError(f"malformed header {header!r}", "header") from e
    terms: dict[Fraction, CycNumber] = {}
    for line in lines[1:]:
        exponent_text, _, poly_text = line.partition(" : ")
        try:
            exponent = Fraction(exponent_text.strip())
        except ValueError as e:
            raise InputError(f"malformed exponent in {line!r}", "exponent") from e
        terms[exponent] = parse_cyc(poly_text, conductor)
    return QExp.build(terms, trunc)


# ---------------------------------------------------------------------------
# Two-variable series in t (Laurent, half-integral) and q (Puiseux)
# ---------------------------------------------------------------------------


def _infconv(e: Envelope, f: Envelope) -> Envelope | None:
    """Lower quadratic bound of the sum of two envelopes over a + b = const."""
    c0, c1, c2 = e
    d0, d1, d2 = f
    if c2 <= 0 or d2 <= 0:
        return None
    s = c2 + d2
    return (
        c0 + d0 - (c1 - d1) ** 2 / (4 * s),
        (c1 * d2 + d1 * c2) / s,
        c2 * d2 / s,
    )


@dataclass(frozen=True, eq=False)
class TQExp:
    """Truncated series in t = e^(2 pi i u) and q = e^(2 pi i tau).

    ``terms`` maps (t-exponent, q-exponent) to coefficients. Every term with
    q-exponent below ``trunc`` is known. The optional ``envelope`` (c0, c1, c2)
    bounds every term t^a q^b, known or not: b >= c0 + c1*a + c2*a^2.
    """

    terms: Mapping[tuple[Fraction, Fraction], CycNumber]
    trunc: Fraction | None = None
    t_denom: int = 2
    q_denom: int = 1
    envelope: Envelope | None = None

    @classmethod
    def build(
        cls,
        terms: Mapping[tuple[Fraction, Fraction], CycNumber],
        trunc: Fraction | None,
        t_denom: int = 2,
        envelope: Envelope | None = None,
    ) -> "TQExp":
        kept = {
            k: c
            for k, c in terms.items()
            if not c.is_zero() and (trunc is None or k[1] < trunc)
        }
        for a, _ in kept:
            if t_denom % a.denominator:
                raise InputError(f"t-exponent {a} off the 1/{t_denom} grid", "t_denom")
        q_denom = denominator_lcm(b for _, b in kept)
        return cls(kept, trunc, t_denom, q_denom, envelope)

    @classmethod
    def monomial(
        cls,
        coeff: "CycNumber | Fraction | int",
        t_exp: Fraction | int = 0,
        q_exp: Fraction | int = 0,
    ) -> "TQExp":
        return cls.build({(as_fraction(t_exp), as_fraction(q_exp)): CycNumber.coerce(coeff)}, None)

    @classmethod
    def one(cls) -> "TQExp":
        return cls.monomial(1)

    def is_exact(self) -> bool:
        return self.trunc is None

    def val(self) -> Fraction | None:
        """Smallest q-exponent among the stored terms."""
        return min(b for _, b in self.terms) if self.terms else None

    def coeff(self, t_exp: Fraction | int, q_exp: Fraction | int) -> CycNumber:
        q_exp = as_fraction(q_exp)
        if self.trunc is not None and q_exp >= self.trunc:
            raise InconclusiveError("coefficient beyond truncation", "trunc", self.trunc, q_exp)
        return self.terms.get((as_fraction(t_exp), q_exp), ZERO)

    def truncate(self, trunc: Fraction | int) -> "TQExp":
        return TQExp.build(self.terms, min_trunc(self.trunc, as_fraction(trunc)), self.t_denom, self.envelope)

    def __add__(self, other: "TQExp") -> "TQExp":
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out[k] + c if k in out else c
        envelope = self.envelope if self.envelope == other.envelope else None
        return TQExp.build(out, min_trunc(self.trunc, other.trunc), lcm(self.t_denom, other.t_denom), envelope)

    def __neg__(self) -> "TQExp":
        return TQExp({k: -c for k, c in self.terms.items()}, self.trunc, self.t_denom, self.q_denom, self.envelope)

    def __sub__(self, other: "TQExp") -> "TQExp":
        return self + (-other)

    def scale(self, c: "CycNumber | Fraction | int") -> "TQExp":
        c = CycNumber.coerce(c)
        return TQExp.build({k: v * c for k, v in self.terms.items()}, self.trunc, self.t_denom, self.envelope)

    def mul_monomial(
        self,
        coeff: "CycNumber | Fraction | int",
        t_exp: Fraction | int,
        q_exp: Fraction | int,
    ) -> "TQExp":
        """Multiply by coeff * t^t_exp * q^q_exp."""
        c = CycNumber.coerce(coeff)
        a0, b0 = as_fraction(t_exp), as_fraction(q_exp)
        envelope = None
        if self.envelope is not None:
            c0, c1, c2 = self.envelope
            envelope = (c0 - c1 * a0 + c2 * a0 * a0 + b0, c1 - 2 * c2 * a0, c2)
        trunc = None if self.trunc is None else self.trunc + b0
        terms = {(a + a0, b + b0): v * c for (a, b), v in self.terms.items()}
        return TQExp.build(terms, trunc, lcm(self.t_denom, a0.denominator), envelope)

    def _mul_trunc(self, other: "TQExp") -> Fraction | None:
        v_self = self.val() if self.terms else self.trunc
        v_other = other.val() if other.terms else other.trunc
        candidates: list[Fraction] = []
        if self.trunc is not None and v_other is not None:
            candidates.append(self.trunc + v_other)
        if other.trunc is not None and v_self is not None:
            candidates.append(other.trunc + v_self)
        return min(candidates) if candidates else None

    def __mul__(self, other: "TQExp | CycNumber | Fraction | int") -> "TQExp":
        if not isinstance(other, TQExp):
            return self.scale(other)
        if (not self.terms and self.is_exact()) or (not other.terms and other.is_exact()):
            return TQExp({}, None, self.t_denom, 1, None)
        trunc = self._mul_trunc(other)
        left = sorted(self.terms.items(), key=lambda kv: kv[0][1])
        right = sorted(other.terms.items(), key=lambda kv: kv[0][1])
        out: dict[tuple[Fraction, Fraction], CycNumber] = {}
        for (a1, b1), c1 in left:
            for (a2, b2), c2 in right:
                b = b1 + b2
                if trunc is not None and b >= trunc:
                    break
                key = (a1 + a2, b)
                product = c1 * c2
                out[key] = out[key] + product if key in out else product
        envelope = None
        if self.envelope is not None and other.envelope is not None:
            envelope = _infconv(self.envelope, other.envelope)
        return TQExp.build(out, trunc, lcm(self.t_denom, other.t_denom), envelope)

    def __pow__(self, exponent: int) -> "TQExp":
        if exponent < 0:
            raise ArithmeticFailure("negative powers of two-variable series are taken as quotients")
        result: TQExp | None = None
        base = self
        while exponent:
            if exponent & 1:
                result = base if result is None else result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return TQExp.one() if result is None else result

    def tau_shift(self) -> "TQExp":
        """tau -> tau + 1."""
        return TQExp.build(
            {(a, b): c * exp_2pi_i(b) for (a, b), c in self.terms.items()},
            self.trunc,
            self.t_denom,
            self.envelope,
        )

    def scale_t(self, n: int) -> "TQExp":
        """u -> n*u, i.e. t -> t^n."""
        if n < 1:
            raise InputError("t-scaling needs a positive integer", "n")
        envelope = None
        if self.envelope is not None:
            c0, c1, c2 = self.envelope
            envelope = (c0, c1 / n, c2 / (n * n))
        terms = {(a * n, b): c for (a, b), c in self.terms.items()}
        return TQExp.build(terms, self.trunc, self.t_denom, envelope)

    def specialize_t_one(self) -> QExp:
        """Set t = 1 (t^(1/2) = 1)."""
        out: dict[Fraction, CycNumber] = {}
        for (_, b), c in self.terms.items():
            out[b] = out[b] + c if b in out else c
        return QExp.build(out, self.trunc, self.q_denom)

    def levels(self) -> dict[Fraction, dict[Fraction, CycNumber]]:
        """Known terms grouped by q-exponent."""
        grouped: dict[Fraction, dict[Fraction, CycNumber]] = defaultdict(dict)
        for (a, b), c in self.terms.items():
            grouped[b][a] = c
        return dict(grouped)

    def conductor(self) -> int:
        return _common_conductor(self.terms.values())

    def __repr__(self) -> str:
        return f"TQExp(terms={len(self.terms)}, val={self.val()}, trunc={self.trunc})"


def _substituted_trunc(trunc: Fraction, envelope: Envelope, r: Fraction, t_denom: int) -> Fraction:
    """Sound q-truncation after t -> c t q^r, from the q-order envelope.

    Unknown terms t^a q^b satisfy b >= max(trunc, E(a)); they land at
    b + r a, so the minimum of max(trunc, E(a)) + r a over the t-grid bounds
    the new unknown region from below.
    """
    c0, c1, c2 = envelope
    if c2 <= 0:
        raise ArithmeticFailure("unbounded t-support: envelope is not strictly convex")
    step = Fraction(1, t_denom)

    def cost(a: Fraction) -> Fraction:
        return max(trunc, c0 + c1 * a + c2 * a * a) + r * a

    vertex = -(c1 + r) / (2 * c2)
    a = Fraction(round(vertex * t_denom), t_denom)
    best = cost(a)
    for direction in (-step, step):
        while True:
            candidate = cost(a + direction)
            if candidate < best:
                a += direction
                best = candidate
            else:
                break
    return best


def tq_substitute(f: TQExp, r: Fraction | int, s: Fraction | int) -> TQExp:
    """u -> u + r*tau + s, i.e. t^a q^b -> e^(2 pi i s a) t^a q^(b + a r).

    Half-integral t-powers use the principal branch t^(1/2) -> e^(pi i s) t^(1/2) q^(r/2).
    """
    r, s = as_fraction(r), as_fraction(s)
    envelope = None
    if f.envelope is not None:
        c0, c1, c2 = f.envelope
        envelope = (c0, c1 + r, c2)
    if f.trunc is None:
        trunc = None
    elif f.envelope is None:
        raise ArithmeticFailure("unbounded t-support: truncated series without a q-order envelope")
    else:
        trunc = _substituted_trunc(f.trunc, f.envelope, r, f.t_denom)
    factors: dict[Fraction, CycNumber] = {}
    terms: dict[tuple[Fraction, Fraction], CycNumber] = {}
    for (a, b), c in f.terms.items():
        new_b = b + a * r
        if trunc is not None and new_b >= trunc:
            continue
        if a not in factors:
            factors[a] = exp_2pi_i(s * a)
        key = (a, new_b)
        value = c * factors[a]
        terms[key] = terms[key] + value if key in terms else value
    return TQExp.build(terms, trunc, f.t_denom, envelope)


def tau_shift(f: "TQExp | QExp") -> "TQExp | QExp":
    """tau -> tau + 1 on either series type."""
    return f.tau_shift()


def _order_at_one_level(poly: Mapping[Fraction, CycNumber], t_denom: int) -> int:
    """Order of vanishing at t = 1 of a Laurent polynomial in t^(1/t_denom)."""
    if not poly:
        raise ArithmeticFailure("zero polynomial has no finite order")
    lowest = min(poly)
    degree = int((max(poly) - lowest) * t_denom)
    coeffs: list[CycNumber] = [ZERO] * (degree + 1)
    for a, c in poly.items():
        coeffs[int((a - lowest) * t_denom)] = c
    order = 0
    while len(coeffs) > 1:
        total = ZERO
        for c in coeffs:
            total = total + c
        if not total.is_zero():
            break
        # synthetic division by (s - 1), coefficients ascending
        quotient: list[CycNumber] = [ZERO] * (len(coeffs) - 1)
        carry = ZERO
        for k in range(len(coeffs) - 1, 0, -1):
            carry = carry + coeffs[k]
            quotient[k - 1] = carry
        coeffs = quotient
        order += 1
    return order


def order_at_one(f: TQExp) -> int:
    """Order of vanishing at t = 1, read off the known q-levels."""
    levels = f.levels()
    if not levels:
        raise InconclusiveError("no known terms to read an order from", "trunc", f.trunc, None)
    return min(_order_at_one_level(poly, f.t_denom) for poly in levels.values())


def serialize_tqexp(f: TQExp) -> str:
    """Text form: header then 'q=<b> t=<a> : poly' lines sorted by (b, a)."""
    conductor = f.conductor()
    trunc = "exact" if f.trunc is None else format_fraction(f.trunc)
    lines = [f"conductor {conductor}, trunc {trunc}"]
    for a, b in sorted(f.terms, key=lambda k: (k[1], k[0])):
        lines.append(f"q={format_fraction(b)} t={format_fraction(a)} : {f.terms[(a, b)].format(conductor)}")
    return "\n".join(lines) + "\n"


def level_denom(level: int) -> int:
    """q-exponent grid for level-N computations: lcm(24, 2 N^2)."""
    return lcm(24, 2 * level * level)
