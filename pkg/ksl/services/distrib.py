"""Lattice-coset test functions and the Siegel and Beilinson-Kato distributions."""

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from math import floor, lcm

from pydantic import ValidationError
from sympy import Matrix, Rational
from sympy.matrices.normalforms import hermite_normal_form

from ksl.config.models import TestFnModel, TestFnTermModel
from ksl.config.settings import settings
from ksl.errors import InconclusiveError, InputError
from ksl.services.exactalg import QExp, QExpComparison
from ksl.services.ksymbol import K1El, KnSym, in_span, ksym, relators, symbol
from ksl.services.thetasiegel import TorsionPoint, decide, relative_compare, siegel_unit
from ksl.utils.helpers import as_fraction, denominator_lcm, format_fraction, rational_lcm
from ksl.utils.logging import logger

Vector = tuple[Fraction, ...]
Rows = tuple[Vector, ...]


def _matrix(rows: Sequence[Sequence[Fraction]]) -> Matrix:
    return Matrix([[Rational(v.numerator, v.denominator) for v in row] for row in rows])


def _rows(matrix: Matrix) -> Rows:
    return tuple(tuple(as_fraction(matrix[i, j]) for j in range(matrix.cols)) for i in range(matrix.rows))


def _apply(matrix: Rows, v: Sequence[Fraction]) -> Vector:
    """matrix @ v for a column vector v."""
    return tuple(sum((m * x for m, x in zip(row, v, strict=True)), Fraction(0)) for row in matrix)


def _row_times(v: Sequence[Fraction], matrix: Rows) -> Vector:
    """v @ matrix for a row vector v."""
    return tuple(sum((v[i] * matrix[i][j] for i in range(len(v))), Fraction(0)) for j in range(len(matrix[0])))


def _frac(x: Fraction) -> Fraction:
    return x - floor(x)


@dataclass(frozen=True)
class LatticeQ:
    """Full-rank lattice in Q^m, rows of ``basis`` in Hermite normal form."""

    dim: int
    basis: Rows

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Fraction | int | str]]) -> "LatticeQ":
        values = [[as_fraction(v) for v in row] for row in rows]
        m = len(values)
        if m == 0 or any(len(row) != m for row in values):
            raise InputError("lattice basis must be a nonempty square matrix", "lattice")
        d = denominator_lcm(v for row in values for v in row)
        integral = Matrix([[int(v * d) for v in row] for row in values])
        if integral.det() == 0:
            raise InputError("lattice basis is singular", "lattice")
        # column-style normal form of the transposed basis
        hnf = hermite_normal_form(integral.T).T
        basis = tuple(tuple(Fraction(int(hnf[i, j]), d) for j in range(m)) for i in range(m))
        return cls(m, basis)

    @classmethod
    def scaled(cls, r: Fraction | int, dim: int) -> "LatticeQ":
        """r Z^dim."""
        r = as_fraction(r)
        return cls.from_rows([[r if i == j else Fraction(0) for j in range(dim)] for i in range(dim)])

    @cached_property
    def inverse(self) -> Rows:
        return _rows(_matrix(self.basis).inv())

    @cached_property
    def covolume(self) -> Fraction:
        return abs(as_fraction(_matrix(self.basis).det()))

    def coordinates(self, v: Sequence[Fraction]) -> Vector:
        return _row_times(v, self.inverse)

    def contains(self, v: Sequence[Fraction]) -> bool:
        return all(x.denominator == 1 for x in self.coordinates(v))

    def contains_lattice(self, other: "LatticeQ") -> bool:
        return all(self.contains(row) for row in other.basis)

    def image(self, matrix: Rows) -> "LatticeQ":
        """The lattice {M l : l in L} for column vectors l."""
        return LatticeQ.from_rows([_apply(matrix, row) for row in self.basis])

    def sum_lattice(self, other: "LatticeQ") -> "LatticeQ":
        """Block-diagonal lattice self x other."""
        m, k = self.dim, other.dim
        rows = [list(row) + [Fraction(0)] * k for row in self.basis]
        rows += [[Fraction(0)] * m + list(row) for row in other.basis]
        return LatticeQ.from_rows(rows)


def minimal_r(L: LatticeQ) -> Fraction:
    """Positive generator of {t in Q : t Z^m contained in L}."""
    return rational_lcm(1 / c for row in L.inverse for c in row if c)


@dataclass(frozen=True, order=True)
class Coset:
    """Indicator of shift + lattice, with the shift reduced to the fundamental domain."""

    lattice_key: Rows = field(init=False, repr=False)
    shift: Vector
    lattice: LatticeQ = field(compare=False)

    def __post_init__(self) -> None:
        if len(self.shift) != self.lattice.dim:
            raise InputError("shift and lattice dimensions differ", "shift")
        coords = [_frac(x) for x in self.lattice.coordinates([as_fraction(v) for v in self.shift])]
        object.__setattr__(self, "shift", _row_times(coords, self.lattice.basis))
        object.__setattr__(self, "lattice_key", self.lattice.basis)

    @classmethod
    def of(cls, shift: Sequence[Fraction | int | str], lattice: LatticeQ | None = None) -> "Coset":
        """Coset of the given lattice (default Z^m)."""
        values = tuple(as_fraction(v) for v in shift)
        return cls(values, lattice or LatticeQ.scaled(1, len(values)))

    @property
    def dim(self) -> int:
        return self.lattice.dim

    def contains(self, point: Sequence[Fraction]) -> bool:
        return self.lattice.contains([as_fraction(p) - s for p, s in zip(point, self.shift, strict=True)])

    def image(self, matrix: Rows) -> "Coset":
        return Coset(_apply(matrix, self.shift), self.lattice.image(matrix))

    def product(self, other: "Coset") -> "Coset":
        return Coset(self.shift + other.shift, self.lattice.sum_lattice(other.lattice))

    def __str__(self) -> str:
        shift = ",".join(format_fraction(v) for v in self.shift)
        return f"[({shift}) + L{list(list(map(format_fraction, row)) for row in self.lattice.basis)}]"


def coset_decompose(c: Coset, r: Fraction | int) -> list[Coset]:
    """Partition of c into cosets of r Z^m, sorted."""
    r = as_fraction(r)
    if r <= 0:
        raise InputError("r must be positive", "r")
    fine = LatticeQ.scaled(r, c.dim)
    if not c.lattice.contains_lattice(fine):
        raise InputError(f"{format_fraction(r)} Z^{c.dim} is not contained in the coset lattice", "r")

    def reduce(v: Sequence[Fraction]) -> Vector:
        return tuple(x - r * floor(x / r) for x in v)

    seen = {reduce([Fraction(0)] * c.dim)}
    frontier = list(seen)
    while frontier:
        nxt = []
        for v in frontier:
            for row in c.lattice.basis:
                w = reduce([x + y for x, y in zip(v, row, strict=True)])
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return sorted(Coset(tuple(s + x for s, x in zip(c.shift, w, strict=True)), fine) for w in seen)


@dataclass(frozen=True, eq=False)
class TestFn:
    """Integer combination of coset indicators on Q^m."""

    __test__ = False

    dim: int
    terms: Mapping[Coset, int] = field(default_factory=dict)

    @classmethod
    def indicator(cls, coset: Coset, coef: int = 1) -> "TestFn":
        return cls(coset.dim, {coset: coef} if coef else {})

    @classmethod
    def from_terms(cls, dim: int, items: Iterable[tuple[Coset, int]]) -> "TestFn":
        out: dict[Coset, int] = {}
        for coset, coef in items:
            if coset.dim != dim:
                raise InputError(f"coset of dimension {coset.dim} in a {dim}-dimensional test function", "dim")
            total = out.get(coset, 0) + coef
            if total:
                out[coset] = total
            else:
                out.pop(coset, None)
        return cls(dim, out)

    def __add__(self, other: "TestFn") -> "TestFn":
        return TestFn.from_terms(self.dim, [*self.terms.items(), *other.terms.items()])

    def __neg__(self) -> "TestFn":
        return TestFn(self.dim, {c: -v for c, v in self.terms.items()})

    def __sub__(self, other: "TestFn") -> "TestFn":
        return self + (-other)

    def scale(self, k: int) -> "TestFn":
        return TestFn(self.dim, {c: v * k for c, v in self.terms.items()} if k else {})

    def value(self, point: Sequence[Fraction | int | str]) -> int:
        p = [as_fraction(x) for x in point]
        return sum(coef for coset, coef in self.terms.items() if coset.contains(p))

    def common_r(self) -> Fraction:
        """Largest r with r Z^m inside every lattice (1 for the zero function)."""
        if not self.terms:
            return Fraction(1)
        return rational_lcm(minimal_r(c.lattice) for c in self.terms)

    def refine(self, r: Fraction | int) -> "TestFn":
        """The same function written over cosets of r Z^m."""
        items = [(piece, coef) for coset, coef in self.terms.items() for piece in coset_decompose(coset, r)]
        return TestFn.from_terms(self.dim, items)

    def canonical(self) -> "TestFn":
        return self.refine(self.common_r())

    def tensor(self, other: "TestFn") -> "TestFn":
        """(x, y) -> self(x) other(y)."""
        items = [(c1.product(c2), v1 * v2) for (c1, v1), (c2, v2) in product(self.terms.items(), other.terms.items())]
        return TestFn.from_terms(self.dim + other.dim, items)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TestFn):
            return NotImplemented
        if self.dim != other.dim:
            return False
        r = rational_lcm([self.common_r(), other.common_r()])
        return dict(self.refine(r).terms) == dict(other.refine(r).terms)

    __hash__ = None  # type: ignore[assignment]

    def to_model(self) -> TestFnModel:
        terms = [
            TestFnTermModel(
                coef=coef,
                shift=[format_fraction(v) for v in coset.shift],
                lattice=[[format_fraction(v) for v in row] for row in coset.lattice.basis],
            )
            for coset, coef in sorted(self.terms.items())
        ]
        return TestFnModel(dim=self.dim, terms=terms)

    @classmethod
    def from_model(cls, model: TestFnModel) -> "TestFn":
        items = []
        for term in model.terms:
            lattice = LatticeQ.from_rows(term.lattice)
            items.append((Coset.of(term.shift, lattice), term.coef))
        return cls.from_terms(model.dim, items)

    @classmethod
    def from_json(cls, text: str) -> "TestFn":
        try:
            model = TestFnModel.model_validate_json(text)
        except ValidationError as e:
            raise InputError(f"malformed test function JSON: {e}", "json") from e
        return cls.from_model(model)


def sample_points(fns: Sequence[TestFn]) -> list[Vector]:
    """Grid on which locally constant functions of the given cosets are determined."""
    dim = fns[0].dim
    cosets = [c for fn in fns for c in fn.terms]
    if not cosets:
        return [tuple(Fraction(0) for _ in range(dim))]
    period = rational_lcm(minimal_r(c.lattice) for c in cosets)
    d = 2 * denominator_lcm(
        [*(v for c in cosets for v in c.shift), *(v for c in cosets for row in c.lattice.basis for v in row), period]
    )
    steps = int(period * d)
    axis = [Fraction(k, d) for k in range(steps)]
    return [tuple(p) for p in product(axis, repeat=dim)]


def pullback(phi: TestFn, M: Sequence[Sequence[Fraction | int | str]]) -> TestFn:
    """(M^* phi)(x) = phi(M x): [v + L] goes to [M^-1 v + M^-1 L]."""
    matrix = _matrix([[as_fraction(v) for v in row] for row in M])
    if matrix.shape != (phi.dim, phi.dim):
        raise InputError(f"expected a {phi.dim}x{phi.dim} matrix", "M")
    if matrix.det() == 0:
        raise InputError("pullback matrix is singular", "M")
    inverse = _rows(matrix.inv())
    return TestFn.from_terms(phi.dim, [(coset.image(inverse), coef) for coset, coef in phi.terms.items()])


def _torsion(w: Sequence[Fraction], r: Fraction) -> TorsionPoint:
    return TorsionPoint(w[0] / r, w[1] / r)


def mu1(phi: TestFn, r: Fraction | int | None = None) -> K1El:
    """Siegel distribution: [a + Z^2] goes to [g_a], extended by Q^x-invariance.

    Each coset is refined to r Z^2, with r = minimal_r of its lattice unless given.
    """
    if phi.dim != 2:
        raise InputError("mu1 takes a test function on Q^2", "dim")
    items: list[tuple[TorsionPoint, int]] = []
    for coset, coef in phi.terms.items():
        step = as_fraction(r) if r is not None else minimal_r(coset.lattice)
        items.extend((_torsion(piece.shift, step), coef) for piece in coset_decompose(coset, step))
    return K1El.from_points(items)


def mu_n(phi: TestFn, n: int) -> KnSym:
    """{mu(phi_1), ..., mu(phi_n)} extended linearly from product cosets of r Z^2n."""
    if n < 1 or phi.dim != 2 * n:
        raise InputError(f"mu_n with n={n} takes a test function on Q^{2 * n}", "dim")
    total = KnSym.zero(n)
    for coset, coef in phi.terms.items():
        step = minimal_r(coset.lattice)
        for piece in coset_decompose(coset, step):
            points = [_torsion(piece.shift[2 * i : 2 * i + 2], step) for i in range(n)]
            total = total + symbol(*points).scale(coef)
    return total


def _unit_product(element: K1El, T: Fraction) -> QExp:
    """prod g_a^c over the terms, scaled to leading coefficient 1."""
    result = QExp.one()
    for a, c in sorted(element.terms.items()):
        if c.denominator != 1:
            raise InputError("unit products need integer exponents", "coef")
        result = result * siegel_unit(a, T) ** int(c)
    return result.scale(result.leading()[1].inv())


def verify_mu_welldef(phi: TestFn, r1: Fraction | int, r2: Fraction | int, T: Fraction | int | None = None) -> bool:
    """mu1 through r1- and r2-refinement agree, by relator span and by q-expansion."""
    r1, r2 = as_fraction(r1), as_fraction(r2)
    for r in (r1, r2):
        fine = LatticeQ.scaled(r, 2)
        if any(not coset.lattice.contains_lattice(fine) for coset in phi.terms):
            raise InputError(f"{format_fraction(r)} Z^2 is not contained in every lattice", "r")
    if r1 == r2:
        return True
    x1, x2 = mu1(phi, r1), mu1(phi, r2)
    difference = x1 - x2
    level = lcm(x1.level(), x2.level())

    span_ok: bool | None = None
    if difference.is_zero():
        span_ok = True
    elif level <= settings.distribution_cap:
        span_ok = in_span(ksym([difference]), relators(level, 1, ["distribution"])).member

    target = as_fraction(T) if T is not None else settings.trunc_value

    def attempt(working: Fraction) -> QExpComparison:
        return relative_compare(_unit_product(x1, working), _unit_product(x2, working), target)

    try:
        series_ok = decide(f"mu_welldef r={r1},{r2}", target, attempt)
    except InconclusiveError:
        if span_ok is None:
            raise
        logger.warning("q-expansion check inconclusive; relying on relator span", r1=str(r1), r2=str(r2))
        return span_ok
    if span_ok is None:
        logger.info("Relator span skipped above the distribution cap", level=level)
        return series_ok
    return span_ok and series_ok
