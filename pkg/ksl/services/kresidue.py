"""Residues of theta-quotient symbols along torsion sections and the Manin relations."""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from ksl.config.settings import settings
from ksl.errors import ArithmeticFailure, CertificateError, InputError
from ksl.services.ksymbol import (
    K1El,
    KnSym,
    ksym,
    manin_relator,
    symbol,
    theta_expr,
    theta_expr_lenient,
    translate_sum,
)
from ksl.services.thetasiegel import TorsionPoint, torsion_points, verify_distribution
from ksl.utils.logging import logger


@dataclass(frozen=True, eq=False)
class ThetaMonomial:
    """Product of theta_p = (_N Theta_p)^12 with rational exponents summing to zero.

    The divisor is 12 N^2 sum_p e_p D_p; along D_w with e_w = 0 the restriction
    is the product of g_(w-p)^(12 N^2 e_p).
    """

    N: int
    exponents: Mapping[TorsionPoint, Fraction] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if sum(self.exponents.values(), Fraction(0)) != 0:
            raise InputError("theta exponents must sum to zero", "exponents")

    @property
    def weight(self) -> int:
        return 12 * self.N * self.N

    def valuation(self, w: TorsionPoint) -> Fraction:
        return self.weight * self.exponents.get(w, Fraction(0))

    def __mul__(self, other: "ThetaMonomial") -> "ThetaMonomial":
        if self.N != other.N:
            raise InputError(f"level mismatch: {self.N} vs {other.N}", "N")
        out = dict(self.exponents)
        for p, e in other.exponents.items():
            out[p] = out.get(p, Fraction(0)) + e
        return ThetaMonomial(self.N, {p: e for p, e in out.items() if e})

    def __pow__(self, e: Fraction | int) -> "ThetaMonomial":
        e = Fraction(e)
        return ThetaMonomial(self.N, {p: v * e for p, v in self.exponents.items()} if e else {})


def theta_quot(N: int, a: TorsionPoint, x: TorsionPoint) -> ThetaMonomial:
    """theta_a / theta_x at level N."""
    if N < 3:
        raise InputError("theta quotients need N >= 3", "N")
    if a == x:
        raise InputError("theta_quot needs a != x", "points")
    for p in (a, x):
        if N % p.level:
            raise InputError(f"{p} is not in A({N})", "points")
    return ThetaMonomial(N, {a: Fraction(1), x: Fraction(-1)})


def pole_section(f: ThetaMonomial) -> TorsionPoint | None:
    """The unique point with negative exponent, if there is exactly one."""
    poles = [p for p, e in f.exponents.items() if e < 0]
    return poles[0] if len(poles) == 1 else None


def restrict(f: ThetaMonomial, w: TorsionPoint, reference: ThetaMonomial | None = None) -> K1El:
    """Restriction to D_w of f, or of its unit part f * reference^(-v_w(f)/v_w(reference))."""
    unit = f
    if f.valuation(w):
        if reference is None:
            raise InputError(f"function has a zero or pole along D{w}; supply a reference", "reference")
        ref_val = reference.valuation(w)
        if not ref_val:
            raise InputError(f"reference is a unit along D{w}", "reference")
        unit = f * reference ** (-f.valuation(w) / ref_val)
    return K1El.from_points((w - p, unit.weight * e) for p, e in unit.exponents.items())


def boundary(
    fs: Sequence[ThetaMonomial],
    w: TorsionPoint,
    reference: ThetaMonomial | None = None,
) -> KnSym:
    """Tame symbol of {f1, f2, f3} along D_w modulo torsion.

    r1 {u2, u3} - r2 {u1, u3} + r3 {u1, u2} with r_i = v_w(f_i) and u_i the unit parts
    relative to the reference (default: the first f_i singular along D_w).
    """
    if len(fs) != 3:
        raise InputError("boundary takes three functions", "fs")
    poles = {pole_section(f) for f in fs}
    if len(poles) != 1 or None in poles:
        raise InputError("functions must share their pole section", "fs")
    if len({f.N for f in fs}) != 1:
        raise InputError("functions must share their level", "fs")
    r = [f.valuation(w) for f in fs]
    if not any(r):
        return KnSym.zero(2)
    if reference is None:
        reference = next(f for f, v in zip(fs, r, strict=True) if v)
    u = [restrict(f, w, reference) for f in fs]
    return (
        ksym([u[1], u[2]]).scale(r[0])
        - ksym([u[0], u[2]]).scale(r[1])
        + ksym([u[0], u[1]]).scale(r[2])
    )


def _distinct(points: Sequence[TorsionPoint], N: int) -> None:
    if len(set(points)) < len(points):
        raise InputError("points must be pairwise distinct", "points")
    for p in points:
        if N % p.level:
            raise InputError(f"{p} is not in A({N})", "points")


def residue_sum(N: int, a: TorsionPoint, b: TorsionPoint, c: TorsionPoint, x: TorsionPoint) -> KnSym:
    """Sum of the boundaries of {theta_a/theta_x, theta_b/theta_x, theta_c/theta_x} over D_a, D_b, D_c, D_x."""
    _distinct((a, b, c, x), N)
    fs = [theta_quot(N, p, x) for p in (a, b, c)]
    total = KnSym.zero(2)
    for w in (a, b, c, x):
        total = total + boundary(fs, w)
    return total


def theta_combination(a: TorsionPoint, b: TorsionPoint, c: TorsionPoint, x: TorsionPoint) -> KnSym:
    """theta(a:b:c) - theta(a:b:x) - theta(a:x:c) - theta(x:b:c)."""
    return theta_expr(a, b, c) - theta_expr(a, b, x) - theta_expr(a, x, c) - theta_expr(x, b, c)


def expected_boundaries(
    a: TorsionPoint, b: TorsionPoint, c: TorsionPoint, x: TorsionPoint
) -> dict[TorsionPoint, KnSym]:
    """Closed forms of the four boundaries divided by (12 N^2)^3."""
    return {
        a: symbol(a - b, c - a) - symbol(a - b, x - a) - symbol(a - x, c - a),
        b: -symbol(b - a, b - c) + symbol(b - a, b - x) + symbol(b - x, b - c),
        c: symbol(c - a, c - b) - symbol(c - a, c - x) - symbol(c - x, c - b),
        x: -symbol(x - c, a - x) - symbol(x - a, b - x) - symbol(x - b, c - x),
    }


def verify_boundary_identities(
    N: int, a: TorsionPoint, b: TorsionPoint, c: TorsionPoint, x: TorsionPoint
) -> bool:
    """Each boundary matches its closed form and the sum matches the theta combination."""
    _distinct((a, b, c, x), N)
    fs = [theta_quot(N, p, x) for p in (a, b, c)]
    scale = Fraction(1, (12 * N * N) ** 3)
    for w, expected in expected_boundaries(a, b, c, x).items():
        if boundary(fs, w).scale(scale) != expected:
            logger.warning("Boundary identity failed", N=N, section=str(w))
            return False
    return residue_sum(N, a, b, c, x).scale(scale) == theta_combination(a, b, c, x)


def _base_shift(M: int, a: TorsionPoint, b: TorsionPoint) -> TorsionPoint:
    """First B in A(M) with B, B + a and B - b all nonzero."""
    for B in torsion_points(M, include_zero=False):
        if not (B + a).is_zero() and not (B - b).is_zero():
            return B
    raise ArithmeticFailure(f"no base shift exists at level {M}")


def _check_lift(points: Sequence[TorsionPoint], N: int, M: int) -> None:
    """Each g_p of level N equals the product of the level-M units g_b with (M/N) b = p."""
    t = M // N
    for p in points:
        if not verify_distribution(p, t, settings.trunc_value):
            raise CertificateError(f"g{p} is not the product of its level {M} lifts", {"point": str(p), "t": t})


def derive_manin(N: int, a: TorsionPoint, b: TorsionPoint, c: TorsionPoint) -> KnSym:
    """Derive {g_a, g_b} + {g_b, g_c} + {g_c, g_a} = 0 from the residue theorem.

    Every step on either side of Suslin reciprocity is checked exactly; the
    vanishing of the total residue itself is taken as given.
    """
    if N < 1:
        raise InputError("N must be positive", "N")
    for p in (a, b, c):
        if N % p.level:
            raise InputError(f"{p} is not in A({N})", "points")
    if not (a + b + c).is_zero():
        raise InputError("a + b + c must vanish", "points")
    if N == 1:
        return KnSym.zero(2)
    if any(p.is_zero() for p in (a, b, c)):
        raise InputError("points must be nonzero", "points")

    M = N if N >= 3 else 4
    if M != N:
        _check_lift((a, b, c), N, M)
    B = _base_shift(M, a, b)
    A, C = B + a, B - b
    theta = theta_expr(A, B, C)

    weight = (12 * M * M) ** 3
    total = KnSym.zero(2)
    outside = [x for x in torsion_points(M) if x not in (A, B, C)]
    for x in outside:
        total = total + residue_sum(M, A, B, C, x)

    for pattern, fixed in (("ab_", (A, B)), ("a_c", (A, C)), ("_bc", (B, C))):
        if not translate_sum(pattern, fixed, M).is_zero():  # type: ignore[arg-type]
            raise CertificateError(f"translate sum {pattern} does not vanish at level {M}", {})
    coincident = KnSym.zero(2)
    for x in (A, B, C):
        coincident = coincident + theta_expr_lenient(A, B, x) + theta_expr_lenient(A, x, C) + theta_expr_lenient(x, B, C)
    if coincident != theta.scale(3):
        raise CertificateError("coincident terms do not reduce to 3 theta(A:B:C)", {})
    if total != theta.scale(weight * (len(outside) + 3)):
        raise CertificateError("total residue differs from M^2 (12 M^2)^3 theta(A:B:C)", {})

    relator = manin_relator(a, b, c)
    if relator != -theta:
        raise CertificateError("Manin relator differs from -theta(A:B:C)", {})
    logger.debug("Derived Manin relation", level=N, working_level=M, base=str(B), terms=len(relator.terms))
    return relator
