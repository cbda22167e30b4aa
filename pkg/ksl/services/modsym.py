"""GL_2 modular symbols on cusp divisors and GL_n modular symbols on functional tuples."""

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations
from math import gcd, lcm
import random

from pydantic import ValidationError
from sympy import Matrix, Rational

from ksl.config.models import DivisorModel, DivisorTermModel
from ksl.config.settings import settings
from ksl.errors import CertificateError, InconclusiveError, InputError
from ksl.services.distrib import Coset, TestFn, mu_n, pullback
from ksl.services.ksymbol import KnSym, RelatorKind, SpanResult, in_span, relators
from ksl.utils.helpers import as_fraction, denominator_lcm, seeded_rng
from ksl.utils.logging import logger

Matrix2 = tuple[tuple[Fraction, ...], ...]


def _fractions(rows: Sequence[Sequence[Fraction | int | str]]) -> Matrix2:
    return tuple(tuple(as_fraction(v) for v in row) for row in rows)


def _sympy(rows: Matrix2) -> Matrix:
    return Matrix([[Rational(v.numerator, v.denominator) for v in row] for row in rows])


def _from_sympy(matrix: Matrix) -> Matrix2:
    return tuple(tuple(as_fraction(matrix[i, j]) for j in range(matrix.cols)) for i in range(matrix.rows))


def _det(rows: Matrix2) -> Fraction:
    return as_fraction(_sympy(rows).det())


def _inverse(rows: Matrix2) -> Matrix2:
    return _from_sympy(_sympy(rows).inv())


def _matmul(a: Matrix2, b: Matrix2) -> Matrix2:
    return tuple(
        tuple(sum((a[i][k] * b[k][j] for k in range(len(b))), Fraction(0)) for j in range(len(b[0])))
        for i in range(len(a))
    )


# ---------------------------------------------------------------------------
# Cusps and degree-zero divisors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Cusp:
    """Point (p:q) of P^1(Q) with coprime p, q and q > 0, or (1:0) for infinity."""

    p: int
    q: int

    def __post_init__(self) -> None:
        p, q = self.p, self.q
        if p == 0 and q == 0:
            raise InputError("(0:0) is not a cusp", "cusp")
        g = gcd(p, q)
        p, q = p // g, q // g
        if q < 0 or (q == 0 and p < 0):
            p, q = -p, -q
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def infinity(cls) -> "Cusp":
        return cls(1, 0)

    @classmethod
    def from_vector(cls, x: Fraction | int, y: Fraction | int) -> "Cusp":
        x, y = as_fraction(x), as_fraction(y)
        d = denominator_lcm([x, y])
        return cls(int(x * d), int(y * d))

    @classmethod
    def parse(cls, text: "str | int | Fraction | Cusp") -> "Cusp":
        """'inf', 'p/q' or an integer."""
        if isinstance(text, Cusp):
            return text
        if isinstance(text, str) and text.strip().lower() in ("inf", "infinity", "oo"):
            return cls.infinity()
        try:
            value = as_fraction(text)
        except (ValueError, ZeroDivisionError) as e:
            raise InputError(f"not a cusp: {text!r}", "cusp") from e
        return cls(value.numerator, value.denominator)

    @property
    def is_infinity(self) -> bool:
        return self.q == 0

    def act(self, gamma: Matrix2) -> "Cusp":
        """Fractional linear action of a 2x2 matrix."""
        x = gamma[0][0] * self.p + gamma[0][1] * self.q
        y = gamma[1][0] * self.p + gamma[1][1] * self.q
        return Cusp.from_vector(x, y)

    def __str__(self) -> str:
        if self.is_infinity:
            return "inf"
        return str(self.p) if self.q == 1 else f"{self.p}/{self.q}"


@dataclass(frozen=True, eq=False)
class DivisorDelta0:
    """Degree-zero divisor on the cusps."""

    terms: Mapping[Cusp, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if sum(self.terms.values()) != 0:
            raise InputError("divisor must have degree zero", "divisor")

    @classmethod
    def from_terms(cls, items: Iterable[tuple[Cusp, int]]) -> "DivisorDelta0":
        out: dict[Cusp, int] = {}
        for cusp, coef in items:
            out[cusp] = out.get(cusp, 0) + coef
        return cls({c: v for c, v in out.items() if v})

    @classmethod
    def path(cls, r: Cusp, s: Cusp) -> "DivisorDelta0":
        """The divisor (s) - (r) of the path r -> s."""
        return cls.from_terms([(s, 1), (r, -1)])

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DivisorDelta0):
            return NotImplemented
        return dict(self.terms) == dict(other.terms)

    __hash__ = None  # type: ignore[assignment]

    def to_model(self) -> DivisorModel:
        return DivisorModel(terms=[DivisorTermModel(cusp=str(c), coef=v) for c, v in sorted(self.terms.items())])

    @classmethod
    def from_json(cls, text: str) -> "DivisorDelta0":
        try:
            model = DivisorModel.model_validate_json(text)
        except ValidationError as e:
            raise InputError(f"malformed divisor JSON: {e}", "json") from e
        return cls.from_terms((Cusp.parse(t.cusp), t.coef) for t in model.terms)


def alpha_for(r: Cusp, s: Cusp) -> Matrix2:
    """alpha with columns the representatives of r and s, so alpha(inf) = r and alpha(0) = s."""
    if r == s:
        raise InputError("alpha_for needs distinct cusps", "cusp")
    return ((Fraction(r.p), Fraction(s.p)), (Fraction(r.q), Fraction(s.q)))


def row_action(gamma: Matrix2, n_rows: int | None = None) -> Matrix2:
    """The matrix of A -> gamma A on n x 2 matrices flattened row by row."""
    n = n_rows or len(gamma)
    size = 2 * n
    rows = [[Fraction(0)] * size for _ in range(size)]
    for i in range(n):
        for k in range(n):
            for j in range(2):
                rows[2 * i + j][2 * k + j] = gamma[i][k]
    return tuple(tuple(row) for row in rows)


def xi2(r: Cusp, s: Cusp, phi: TestFn) -> KnSym:
    """xi(r -> s)(phi) = mu^2(alpha^* phi) with (alpha^* phi)(A) = phi(alpha A)."""
    if phi.dim != 4:
        raise InputError("xi2 takes a test function on 2x2 matrices", "dim")
    return mu_n(pullback(phi, row_action(alpha_for(r, s))), 2)


def xi_divisor(divisor: DivisorDelta0, phi: TestFn) -> KnSym:
    """xi on a degree-zero divisor, written as a sum of paths from infinity."""
    total = KnSym.zero(2)
    for cusp, coef in sorted(divisor.terms.items()):
        if not cusp.is_infinity:
            total = total + xi2(Cusp.infinity(), cusp, phi).scale(coef)
    return total


# ---------------------------------------------------------------------------
# Agreement up to relators
# ---------------------------------------------------------------------------


def agree(x: KnSym, y: KnSym, kinds: Sequence[RelatorKind]) -> SpanResult:
    """Exact equality, else membership of x - y in the relator span at the working level.

    Relators lifted only by atoms in the support of x - y are tried first; the
    certificate then refers to that smaller set.
    """
    if x == y:
        return SpanResult(True, ())
    level = lcm(x.level(), y.level())
    if level > settings.distribution_cap and "distribution" in kinds:
        raise InconclusiveError("working level above the distribution cap", "level", level, settings.distribution_cap)
    difference = x - y
    support = {p for key in difference.terms for p in key}
    result = in_span(difference, relators(level, x.n, kinds, lift_atoms=support))
    if not result.member:
        result = in_span(difference, relators(level, x.n, kinds))
    result.require("difference")
    return result


def verify_torus_independence(r: Cusp, s: Cusp, phi: TestFn, t: tuple[Fraction | int, Fraction | int]) -> bool:
    """xi(r -> s) computed through alpha and through alpha diag(t) agree."""
    t1, t2 = as_fraction(t[0]), as_fraction(t[1])
    if not t1 or not t2:
        raise InputError("torus element must be invertible", "t")
    alpha = alpha_for(r, s)
    twisted = _matmul(alpha, ((t1, Fraction(0)), (Fraction(0), t2)))
    x = mu_n(pullback(phi, row_action(alpha)), 2)
    y = mu_n(pullback(phi, row_action(twisted)), 2)
    return agree(x, y, ["distribution"]).member


def verify_manin_modsym(
    r: Cusp, s: Cusp, t: Cusp, phi: TestFn
) -> tuple[SpanResult, SpanResult]:
    """Certificates for xi(r->s) + xi(s->r) = 0 and xi(r->s) + xi(s->t) + xi(t->r) = 0."""
    if len({r, s, t}) < 3:
        raise InputError("Manin relations need three distinct cusps", "cusp")
    two_term = xi2(r, s, phi) + xi2(s, r, phi)
    if not two_term.is_zero():
        raise CertificateError("two-term relation is not exactly zero", {})
    three_term = xi2(r, s, phi) + xi2(s, t, phi) + xi2(t, r, phi)
    level = three_term.level()
    if level > settings.distribution_cap:
        raise InconclusiveError("working level above the distribution cap", "level", level, settings.distribution_cap)
    result = in_span(three_term, relators(level, 2, ["manin", "distribution"]))
    result.require("three-term sum")
    return SpanResult(True, ()), result


# ---------------------------------------------------------------------------
# GL_n symbols
# ---------------------------------------------------------------------------


def pair_map(n: int) -> Matrix2:
    """(v1, v2) in Q^n x Q^n to the n x 2 matrix with columns v1, v2, flattened by rows."""
    return lambda_map(tuple(tuple(Fraction(int(i == k)) for k in range(n)) for i in range(n)))


def lambda_map(lambdas: Sequence[Sequence[Fraction | int | str]]) -> Matrix2:
    """(v1, v2) to the matrix (lambda_i(v1), lambda_i(v2)) flattened by rows."""
    lam = _fractions(lambdas)
    n = len(lam)
    rows = [[Fraction(0)] * (2 * n) for _ in range(2 * n)]
    for i in range(n):
        for j in range(2):
            for k in range(n):
                rows[2 * i + j][j * n + k] = lam[i][k]
    return tuple(tuple(row) for row in rows)


def xi_n(lambdas: Sequence[Sequence[Fraction | int | str]], phi: TestFn) -> KnSym:
    """phi(lambda)^(-1)_* mu^n, or 0 when the functionals are dependent."""
    lam = _fractions(lambdas)
    n = len(lam)
    if n < 1 or any(len(row) != n for row in lam):
        raise InputError("lambda must be n functionals on Q^n", "lambda")
    if phi.dim != 2 * n:
        raise InputError(f"xi_n with n={n} takes a test function on Q^{2 * n}", "dim")
    if _det(lam) == 0:
        return KnSym.zero(n)
    return mu_n(pullback(phi, _inverse(lambda_map(lam))), n)


def product_test_fn(u: Sequence[Fraction | int | str], v: Sequence[Fraction | int | str]) -> TestFn:
    """[u + Z^n] tensor [v + Z^n] on Q^n x Q^n."""
    return TestFn.indicator(Coset.of([*u, *v]))


def kernel_cusp(functional: Sequence[Fraction | int | str]) -> Cusp:
    """Slope of ker(lambda) for a nonzero functional on Q^2."""
    a, b = (as_fraction(x) for x in functional)
    if not a and not b:
        raise InputError("zero functional has no kernel line", "lambda")
    return Cusp.from_vector(-b, a)


def slope_nu(l1: Sequence[Fraction | int | str], l2: Sequence[Fraction | int | str]) -> DivisorDelta0:
    """(slope ker l1) - (slope ker l2); zero when (l1, l2) is not a basis."""
    if _det(_fractions([l1, l2])) == 0:
        return DivisorDelta0()
    return DivisorDelta0.path(kernel_cusp(l2), kernel_cusp(l1))


def verify_cgcom(lambdas: Sequence[Sequence[Fraction | int | str]], phi: TestFn) -> bool:
    """xi_2(lambda) equals xi on nu(lambda), read through the identification (v1, v2) -> matrix."""
    lam = _fractions(lambdas)
    lhs = xi_n(lam, phi)
    divisor = slope_nu(lam[0], lam[1])
    if divisor.is_zero():
        return lhs.is_zero()
    r, s = kernel_cusp(lam[1]), kernel_cusp(lam[0])
    if divisor != DivisorDelta0.path(r, s):
        return False
    rhs = xi2(r, s, pullback(phi, _inverse(pair_map(2))))
    return agree(lhs, rhs, ["distribution"]).member


def general_position_reduction(lambdas: Sequence[Sequence[Fraction | int | str]]) -> tuple[int, ...] | None:
    """A minimal linearly dependent subset (indices), or None if the set is independent."""
    lam = _fractions(lambdas)
    for size in range(1, len(lam) + 1):
        for subset in combinations(range(len(lam)), size):
            if _sympy(tuple(lam[i] for i in subset)).rank() < size:
                return subset
    return None


def in_general_position(lambdas: Sequence[Sequence[Fraction | int | str]]) -> bool:
    """Every proper subset is independent."""
    subset = general_position_reduction(lambdas)
    return subset is None or len(subset) == len(lambdas)


def cocycle_terms(lambdas: Sequence[Sequence[Fraction | int | str]], phi: TestFn) -> list[KnSym]:
    """(-1)^i xi(lambda_0, ..., omit lambda_i, ..., lambda_n)(phi) for each i."""
    lam = _fractions(lambdas)
    return [xi_n(lam[:i] + lam[i + 1 :], phi).scale((-1) ** i) for i in range(len(lam))]


def verify_cocycle(lambdas: Sequence[Sequence[Fraction | int | str]], phi: TestFn) -> bool:
    """The alternating sum over an (n+1)-tuple vanishes modulo the relators.

    Off a minimal dependent subset J, every omitted tuple still contains J and
    must vanish exactly.
    """
    lam = _fractions(lambdas)
    n = len(lam) - 1
    terms = cocycle_terms(lam, phi)
    subset = general_position_reduction(lam)
    if subset is not None and len(subset) < len(lam):
        if any(not terms[i].is_zero() for i in range(len(lam)) if i not in subset):
            logger.warning("Tuple containing a dependent subset did not vanish", subset=subset)
            return False
    total = KnSym.zero(n)
    for term in terms:
        total = total + term
    if total.is_zero():
        return True
    kinds: list[RelatorKind] = ["manin", "distribution"] if n == 2 else ["product-lift", "distribution"]
    return agree(total, KnSym.zero(n), kinds).member


# ---------------------------------------------------------------------------
# Seeded axiom battery
# ---------------------------------------------------------------------------


def _unimodular(n: int, rng: random.Random, steps: int = 6) -> Matrix2:
    """Random element of GL_n(Z) as a product of elementary matrices and a sign."""
    rows = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for _ in range(steps):
        i, j = rng.sample(range(n), 2)
        c = rng.choice([-1, 1])
        rows[i] = [x + c * y for x, y in zip(rows[i], rows[j], strict=True)]
    k = rng.randrange(n)
    rows[k] = [-x for x in rows[k]]
    return tuple(tuple(row) for row in rows)


def _add(x: Sequence[Fraction], y: Sequence[Fraction]) -> tuple[Fraction, ...]:
    return tuple(a + b for a, b in zip(x, y, strict=True))


def _invertible(n: int, rng: random.Random) -> Matrix2:
    while True:
        rows = tuple(tuple(Fraction(rng.randint(-2, 2), rng.choice([1, 1, 2])) for _ in range(n)) for _ in range(n))
        if _det(rows) != 0:
            return rows


def _random_test_fn(n: int, N: int, rng: random.Random) -> TestFn:
    u = [Fraction(rng.randrange(N), N) for _ in range(n)]
    v = [Fraction(rng.randrange(N), N) for _ in range(n)]
    return product_test_fn(u, v)


def _permutation_sign(perm: Sequence[int]) -> int:
    sign = 1
    for i, j in combinations(range(len(perm)), 2):
        if perm[i] > perm[j]:
            sign = -sign
    return sign


def verify_axioms(n: int, N: int, seed: int | None = None, samples: int | None = None) -> dict[str, bool]:
    """Equivariance, homogeneity, antisymmetry, degeneracy and the cocycle relation on a seeded battery.

    ``samples`` defaults to settings.axiom_samples.
    """
    if n not in (2, 3):
        raise InputError("axiom battery runs for n = 2 or 3", "n")
    if N < 1:
        raise InputError("N must be positive", "N")
    samples = settings.axiom_samples if samples is None else samples
    rng = seeded_rng(seed)
    results = {
        "equivariance": True,
        "homogeneity": True,
        "antisymmetry": True,
        "degeneracy": True,
        "cocycle_general": True,
        "cocycle_degenerate": True,
    }
    for _ in range(samples):
        lam = _unimodular(n, rng)
        phi = _random_test_fn(n, N, rng)
        base = xi_n(lam, phi)

        gamma = _invertible(n, rng)
        moved = pullback(phi, _block(gamma))
        if xi_n(_matmul(lam, gamma), moved) != base:
            results["equivariance"] = False

        signs = tuple(Fraction(rng.choice([-1, 1])) for _ in range(n))
        flipped = tuple(tuple(s * x for x in row) for s, row in zip(signs, lam, strict=True))
        central = tuple(tuple(2 * x for x in row) for row in lam)
        if xi_n(flipped, phi) != base or xi_n(central, phi) != base:
            results["homogeneity"] = False
        # a single row scaled by 2 agrees modulo distribution relators
        scaled = (tuple(2 * x for x in lam[0]), *lam[1:])
        results["homogeneity"] &= agree(xi_n(scaled, phi), base, ["distribution"]).member

        for perm in permutations(range(n)):
            permuted = tuple(lam[i] for i in perm)
            if xi_n(permuted, phi) != base.scale(_permutation_sign(perm)):
                results["antisymmetry"] = False

        singular = (*lam[:-1], _add(lam[0], lam[1])) if n > 2 else (lam[0], tuple(-x for x in lam[0]))
        if not xi_n(singular, phi).is_zero():
            results["degeneracy"] = False

        general = (tuple(sum(col, Fraction(0)) for col in zip(*lam, strict=True)), *lam)
        results["cocycle_general"] &= in_general_position(general) and verify_cocycle(general, phi)

        # n = 3: lambda_0 + lambda_1 next to both; n = 2: a repeated functional
        partial = (_add(lam[0], lam[1]) if n > 2 else lam[0], *lam)
        results["cocycle_degenerate"] &= verify_cocycle(partial, phi)
    logger.info("Axiom battery finished", n=n, N=N, results=results)
    return results


def _block(gamma: Matrix2) -> Matrix2:
    """(v1, v2) -> (gamma v1, gamma v2) on Q^n x Q^n."""
    n = len(gamma)
    rows = [[Fraction(0)] * (2 * n) for _ in range(2 * n)]
    for i in range(n):
        for k in range(n):
            rows[i][k] = gamma[i][k]
            rows[n + i][n + k] = gamma[i][k]
    return tuple(tuple(row) for row in rows)
