"""Formal Milnor K-symbols on Siegel-unit generators, tensored with Q."""

from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations, product
import json
from math import lcm
from typing import Any, Literal

from pydantic import ValidationError
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from ksl.config.models import KnSymModel, KnSymTermModel
from ksl.config.settings import settings
from ksl.errors import CertificateError, InputError
from ksl.services.thetasiegel import TorsionPoint, preimages, torsion_points
from ksl.utils.helpers import as_fraction, format_fraction
from ksl.utils.logging import logger

RelatorKind = Literal["manin", "distribution", "product-lift"]
RELATOR_KINDS: tuple[RelatorKind, ...] = ("manin", "distribution", "product-lift")
Key = tuple[TorsionPoint, ...]


def atom(point: TorsionPoint) -> TorsionPoint | None:
    """Canonical generator for [g_a] = [g_-a]; None for the zero point."""
    if point.is_zero():
        return None
    return min(point, -point)


def atoms_of_level(N: int) -> list[TorsionPoint]:
    """All atoms of A(N) in their total order."""
    return sorted({a for p in torsion_points(N, include_zero=False) if (a := atom(p)) is not None})


def canonical_tuple(atoms: Sequence[TorsionPoint]) -> tuple[int, Key] | None:
    """Sort a tuple of atoms, returning the permutation sign; None when an atom repeats."""
    if len(set(atoms)) < len(atoms):
        return None
    items = list(atoms)
    sign = 1
    # insertion sort, counting transpositions
    for i in range(1, len(items)):
        j = i
        while j > 0 and items[j - 1] > items[j]:
            items[j - 1], items[j] = items[j], items[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(items)


def _accumulate(target: dict[Any, Fraction], key: Any, value: Fraction) -> None:
    total = target.get(key, Fraction(0)) + value
    if total:
        target[key] = total
    else:
        target.pop(key, None)


@dataclass(frozen=True, eq=False)
class K1El:
    """Element of the Q-span of Siegel-unit classes [g_a]."""

    terms: Mapping[TorsionPoint, Fraction] = field(default_factory=dict)

    @classmethod
    def of(cls, point: TorsionPoint, coef: Fraction | int = 1) -> "K1El":
        return cls.from_points([(point, Fraction(coef))])

    @classmethod
    def from_points(cls, items: Iterable[tuple[TorsionPoint, Fraction | int]]) -> "K1El":
        out: dict[TorsionPoint, Fraction] = {}
        for point, coef in items:
            key = atom(point)
            if key is not None:
                _accumulate(out, key, Fraction(coef))
        return cls(out)

    def __add__(self, other: "K1El") -> "K1El":
        return K1El.from_points([*self.terms.items(), *other.terms.items()])

    def __neg__(self) -> "K1El":
        return K1El({a: -c for a, c in self.terms.items()})

    def __sub__(self, other: "K1El") -> "K1El":
        return self + (-other)

    def scale(self, c: Fraction | int) -> "K1El":
        c = Fraction(c)
        return K1El({a: v * c for a, v in self.terms.items()} if c else {})

    def is_zero(self) -> bool:
        return not self.terms

    def level(self) -> int:
        return lcm(1, *(a.level for a in self.terms))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, K1El):
            return NotImplemented
        return dict(self.terms) == dict(other.terms)

    __hash__ = None  # type: ignore[assignment]

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"{format_fraction(c)}*[g{a}]" for a, c in sorted(self.terms.items()))


@dataclass(frozen=True, eq=False)
class KnSym:
    """Element of the Q-span of n-fold symbols {g_a1, ..., g_an} in normal form.

    Keys are strictly increasing atom tuples; coefficients are nonzero.
    """

    n: int
    terms: Mapping[Key, Fraction] = field(default_factory=dict)

    @classmethod
    def zero(cls, n: int) -> "KnSym":
        return cls(n, {})

    @classmethod
    def from_terms(cls, n: int, items: Iterable[tuple[Sequence[TorsionPoint], Fraction | int]]) -> "KnSym":
        """Canonicalize arbitrary point tuples: atoms, skew sign, repeated atoms dropped."""
        out: dict[Key, Fraction] = {}
        for points, coef in items:
            if len(points) != n:
                raise InputError(f"expected {n} entries, got {len(points)}", "atoms")
            atoms: list[TorsionPoint] = []
            for p in points:
                a = atom(p)
                if a is None:
                    break
                atoms.append(a)
            else:
                canonical = canonical_tuple(atoms)
                if canonical is not None:
                    sign, key = canonical
                    _accumulate(out, key, sign * Fraction(coef))
        return cls(n, out)

    def _check_arity(self, other: "KnSym") -> None:
        if self.n != other.n:
            raise InputError(f"arity mismatch: {self.n} vs {other.n}", "n")

    def __add__(self, other: "KnSym") -> "KnSym":
        self._check_arity(other)
        out = dict(self.terms)
        for key, c in other.terms.items():
            _accumulate(out, key, c)
        return KnSym(self.n, out)

    def __neg__(self) -> "KnSym":
        return KnSym(self.n, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "KnSym") -> "KnSym":
        return self + (-other)

    def scale(self, c: Fraction | int) -> "KnSym":
        c = Fraction(c)
        return KnSym(self.n, {k: v * c for k, v in self.terms.items()} if c else {})

    def wedge(self, other: "KnSym") -> "KnSym":
        """Product of symbols {x..., y...}."""
        items = (
            (left + right, c1 * c2)
            for (left, c1), (right, c2) in product(self.terms.items(), other.terms.items())
        )
        return KnSym.from_terms(self.n + other.n, items)

    def is_zero(self) -> bool:
        return not self.terms

    def atoms(self) -> set[TorsionPoint]:
        return {a for key in self.terms for a in key}

    def level(self) -> int:
        """lcm of the atom levels (1 for the zero symbol)."""
        return lcm(1, *(a.level for a in self.atoms()))

    def normalized(self) -> "KnSym":
        """Scalar multiple whose first term has coefficient 1."""
        if not self.terms:
            return self
        first = min(self.terms)
        return self.scale(1 / self.terms[first])

    def frozen(self) -> frozenset[tuple[Key, Fraction]]:
        return frozenset(self.terms.items())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnSym):
            return NotImplemented
        return self.n == other.n and dict(self.terms) == dict(other.terms)

    __hash__ = None  # type: ignore[assignment]

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for key, c in sorted(self.terms.items()):
            inner = ",".join(f"g{a}" for a in key)
            parts.append(f"{format_fraction(c)}*{{{inner}}}")
        return " + ".join(parts)

    def to_model(self, level: int | None = None) -> KnSymModel:
        terms = [
            KnSymTermModel(
                coef=format_fraction(c),
                atoms=[[a.a1.numerator, a.a1.denominator, a.a2.numerator, a.a2.denominator] for a in key],
            )
            for key, c in sorted(self.terms.items())
        ]
        return KnSymModel(n=self.n, level=level or self.level(), terms=terms)

    @classmethod
    def from_model(cls, model: KnSymModel) -> "KnSym":
        items: list[tuple[list[TorsionPoint], Fraction]] = []
        for term in model.terms:
            points = [TorsionPoint(Fraction(a[0], a[1]), Fraction(a[2], a[3])) for a in term.atoms]
            if any(model.level % p.level for p in points):
                raise InputError(f"atom level does not divide {model.level}", "level")
            items.append((points, Fraction(term.coef)))
        return cls.from_terms(model.n, items)

    def to_json(self, level: int | None = None) -> str:
        return json.dumps(self.to_model(level).model_dump(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "KnSym":
        try:
            model = KnSymModel.model_validate_json(text)
        except ValidationError as e:
            raise InputError(f"malformed symbol JSON: {e}", "json") from e
        return cls.from_model(model)


def ksym(entries: Sequence[K1El]) -> KnSym:
    """Multilinear expansion of {x_1, ..., x_n} into normal form."""
    if not entries:
        raise InputError("a symbol needs at least one entry", "entries")
    items = []
    for combo in product(*(e.terms.items() for e in entries)):
        coef = Fraction(1)
        for _, c in combo:
            coef *= c
        items.append(([a for a, _ in combo], coef))
    return KnSym.from_terms(len(entries), items)


def symbol(*points: TorsionPoint) -> KnSym:
    """{g_p1, ..., g_pn}."""
    return KnSym.from_terms(len(points), [(points, Fraction(1))])


def theta_expr_lenient(a: TorsionPoint, b: TorsionPoint, c: TorsionPoint) -> KnSym:
    """{g_(a-b), g_(c-a)} + {g_(c-a), g_(b-c)} + {g_(b-c), g_(a-b)}; coincident points give g_0 = 1 terms."""
    ab, ca, bc = a - b, c - a, b - c
    return symbol(ab, ca) + symbol(ca, bc) + symbol(bc, ab)


def theta_expr(a: TorsionPoint, b: TorsionPoint, c: TorsionPoint) -> KnSym:
    if len({a, b, c}) < 3:
        raise InputError("theta_expr needs pairwise distinct points", "points")
    return theta_expr_lenient(a, b, c)


TranslatePattern = Literal["ab_", "a_c", "_bc"]


def _require_level(points: Iterable[TorsionPoint], N: int) -> None:
    for p in points:
        if N % p.level:
            raise InputError(f"{p} is not in A({N})", "points")


def translate_sum(pattern: TranslatePattern, fixed: tuple[TorsionPoint, TorsionPoint], N: int) -> KnSym:
    """Sum over x in A(N) of theta with x in the free slot."""
    if N < 1:
        raise InputError("N must be positive", "N")
    _require_level(fixed, N)
    p, r = fixed
    total = KnSym.zero(2)
    for x in torsion_points(N):
        if pattern == "ab_":
            total = total + theta_expr_lenient(p, r, x)
        elif pattern == "a_c":
            total = total + theta_expr_lenient(p, x, r)
        elif pattern == "_bc":
            total = total + theta_expr_lenient(x, p, r)
        else:
            raise InputError(f"unknown pattern {pattern!r}", "pattern")
    return total


def manin_relator(a: TorsionPoint, b: TorsionPoint, c: TorsionPoint) -> KnSym:
    """{g_a, g_b} + {g_b, g_c} + {g_c, g_a}."""
    return symbol(a, b) + symbol(b, c) + symbol(c, a)


def distribution_element(a: TorsionPoint, t: int) -> K1El:
    """[g_a] - sum over t b = a of [g_b]."""
    return K1El.of(a) - K1El.from_points((b, 1) for b in preimages(a, t))


# ---------------------------------------------------------------------------
# Relator sets
# ---------------------------------------------------------------------------


Echelon = dict[Key, tuple[dict[Key, Fraction], dict[int, Fraction]]]


def _axpy(target: dict[Any, Fraction], source: Mapping[Any, Fraction], factor: Fraction) -> None:
    for key, c in source.items():
        value = target.get(key, Fraction(0)) + factor * c
        if value:
            target[key] = value
        else:
            target.pop(key, None)


def _eliminate(terms: Mapping[Key, Fraction], echelon: Echelon) -> tuple[dict[Key, Fraction], dict[int, Fraction]]:
    """Clear leading keys against the pivots; returns the remainder and the relator combination removed."""
    row = dict(terms)
    used: dict[int, Fraction] = {}
    while row:
        lead = min(row)
        if lead not in echelon:
            break
        pivot_row, pivot_used = echelon[lead]
        factor = row[lead]
        _axpy(row, pivot_row, -factor)
        _axpy(used, pivot_used, factor)
    return row, used


@dataclass(frozen=True)
class RelatorSet:
    """Finite, deterministically ordered list of symbols asserted to vanish."""

    level: int
    n: int
    relators: tuple[KnSym, ...]
    tags: tuple[RelatorKind, ...]

    def __len__(self) -> int:
        return len(self.relators)

    def of_kind(self, kind: RelatorKind) -> list[KnSym]:
        return [r for r, tag in zip(self.relators, self.tags, strict=True) if tag == kind]

    @cached_property
    def echelon(self) -> Echelon:
        """Pivot key -> (row with unit leading coefficient, the relator combination equal to it)."""
        echelon: Echelon = {}
        for j, relator in enumerate(self.relators):
            row, used = _eliminate(relator.terms, echelon)
            if not row:
                continue
            combination = {j: Fraction(1)}
            _axpy(combination, used, Fraction(-1))
            lead = min(row)
            inverse = 1 / row[lead]
            echelon[lead] = ({k: c * inverse for k, c in row.items()}, {i: c * inverse for i, c in combination.items()})
        return echelon


def _manin_set(W: int) -> Iterator[KnSym]:
    points = torsion_points(W, include_zero=False)
    for a, b in product(points, repeat=2):
        c = -(a + b)
        if not c.is_zero():
            yield manin_relator(a, b, c)


def _distribution_set(W: int, n: int, lift_atoms: Sequence[TorsionPoint]) -> Iterator[KnSym]:
    if W > settings.distribution_cap:
        raise InputError(f"level {W} exceeds the distribution cap {settings.distribution_cap}", "N")
    lifts = [symbol(*xs) for xs in combinations(lift_atoms, n - 1)] if n > 1 else []
    for M in range(1, W + 1):
        if W % M:
            continue
        for t in range(2, W // M + 1):
            if (W // M) % t:
                continue
            for a in torsion_points(M):
                element = distribution_element(a, t)
                if element.is_zero():
                    continue
                base = ksym([element])
                if n == 1:
                    yield base
                for lift in lifts:
                    yield base.wedge(lift)


def _product_lift_set(W: int, n: int, lift_atoms: Sequence[TorsionPoint]) -> Iterator[KnSym]:
    tuples = [symbol(*xs) for xs in combinations(lift_atoms, n - 2)]
    for relator in _manin_set(W):
        for lift in tuples:
            yield relator.wedge(lift)


def relators(
    W: int,
    n: int,
    kinds: Iterable[RelatorKind],
    lift_atoms: Iterable[TorsionPoint] | None = None,
) -> RelatorSet:
    """Relators at working level W and arity n.

    manin contributes at arity 2 and product-lift at arity >= 3 (manin relators
    times atom tuples); distribution relators come from every (M, t) with
    M t | W, lifted by atom tuples of A(W). Results are deduplicated up to scalars.
    ``lift_atoms`` restricts the lifting tuples to those atoms, which gives a
    smaller set of genuine relators.
    """
    if W < 1:
        raise InputError("level must be positive", "N")
    if n < 1:
        raise InputError("arity must be positive", "n")
    wanted = set(kinds)
    unknown = wanted - set(RELATOR_KINDS)
    if unknown:
        raise InputError(f"unknown relator kinds: {sorted(unknown)}", "kinds")
    if lift_atoms is None:
        atoms = tuple(atoms_of_level(W))
    else:
        atoms = tuple(sorted({a for p in lift_atoms if (a := atom(p)) is not None}))
    ordered = tuple(kind for kind in RELATOR_KINDS if kind in wanted)
    return _generate_relators(W, n, ordered, atoms, settings.distribution_cap)


@lru_cache(maxsize=128)
def _generate_relators(
    W: int,
    n: int,
    kinds: tuple[RelatorKind, ...],
    lift_atoms: tuple[TorsionPoint, ...],
    distribution_cap: int,
) -> RelatorSet:
    seen: set[frozenset[tuple[Key, Fraction]]] = set()
    found: list[KnSym] = []
    tags: list[RelatorKind] = []

    def add(kind: RelatorKind, candidates: Iterable[KnSym]) -> None:
        for candidate in candidates:
            if candidate.is_zero():
                continue
            key = candidate.normalized().frozen()
            if key not in seen:
                seen.add(key)
                found.append(candidate.normalized())
                tags.append(kind)

    if "manin" in kinds and n == 2:
        add("manin", _manin_set(W))
    if "distribution" in kinds:
        add("distribution", _distribution_set(W, n, lift_atoms))
    if "product-lift" in kinds and n >= 3:
        add("product-lift", _product_lift_set(W, n, lift_atoms))
    logger.debug("Generated relators", level=W, n=n, kinds=list(kinds), lift_atoms=len(lift_atoms), count=len(found))
    return RelatorSet(W, n, tuple(found), tuple(tags))


# ---------------------------------------------------------------------------
# Exact span membership
# ---------------------------------------------------------------------------


def _qq(value: Fraction) -> Any:
    return QQ(value.numerator, value.denominator)


@dataclass(frozen=True)
class SpanResult:
    """Membership certificate (coefficients per relator) or a separating witness."""

    member: bool
    coefficients: tuple[Fraction, ...] | None = None
    witness: Mapping[Key, Fraction] | None = None

    def require(self, what: str = "symbol") -> tuple[Fraction, ...]:
        if not self.member or self.coefficients is None:
            raise CertificateError(f"{what} is not in the relator span", dict(self.witness or {}))
        return self.coefficients


def _basis(symbols: Iterable[KnSym]) -> list[Key]:
    return sorted({key for s in symbols for key in s.terms})


def _rref(rows: Sequence[Mapping[int, Fraction]], width: int) -> tuple[Any, tuple[int, ...]]:
    data = {i: {j: _qq(v) for j, v in row.items()} for i, row in enumerate(rows) if row}
    matrix = DomainMatrix(data, (len(rows), width), QQ)
    reduced, pivots = matrix.rref()
    return reduced.to_Matrix(), tuple(pivots)


def _combine(relator_set: RelatorSet, coefficients: Sequence[Fraction]) -> KnSym:
    total = KnSym.zero(relator_set.n)
    for relator, c in zip(relator_set.relators, coefficients, strict=True):
        if c:
            total = total + relator.scale(c)
    return total


def in_span(x: KnSym, relator_set: RelatorSet) -> SpanResult:
    """Exact membership of x in the Q-span of the relators, with a checked certificate."""
    if x.n != relator_set.n:
        raise InputError(f"arity mismatch: {x.n} vs {relator_set.n}", "n")
    if relator_set.level % x.level():
        raise InputError(f"symbol level {x.level()} does not divide {relator_set.level}", "level")
    if x.is_zero():
        return SpanResult(True, tuple(Fraction(0) for _ in relator_set.relators))
    remainder, used = _eliminate(x.terms, relator_set.echelon)
    if not remainder:
        coefficients = tuple(used.get(j, Fraction(0)) for j in range(len(relator_set.relators)))
        if _combine(relator_set, coefficients) != x:
            raise CertificateError("certificate failed re-substitution", {})
        return SpanResult(True, coefficients)
    basis = _basis([x, *relator_set.relators])
    index = {key: i for i, key in enumerate(basis)}
    return SpanResult(False, witness=_witness(x, relator_set, basis, index))


def _witness(x: KnSym, relator_set: RelatorSet, basis: list[Key], index: dict[Key, int]) -> dict[Key, Fraction]:
    """A functional w with w(relator) = 0 for every relator and w(x) = 1."""
    rows = [{index[key]: c for key, c in r.terms.items()} for r in relator_set.relators]
    if rows:
        reduced, pivots = _rref(rows, len(basis))
    else:
        reduced, pivots = None, ()
    pivot_set = set(pivots)
    for free in range(len(basis)):
        if free in pivot_set:
            continue
        vector = {free: Fraction(1)}
        for row, col in enumerate(pivots):
            value = as_fraction(reduced[row, free])
            if value:
                vector[col] = -value
        pairing = sum((c * vector.get(index[key], Fraction(0)) for key, c in x.terms.items()), Fraction(0))
        if pairing:
            witness = {basis[i]: v / pairing for i, v in vector.items()}
            _check_witness(witness, x, relator_set)
            return witness
    raise CertificateError("no separating functional found", {})


def pair(functional: Mapping[Key, Fraction], s: KnSym) -> Fraction:
    return sum((c * functional.get(key, Fraction(0)) for key, c in s.terms.items()), Fraction(0))


def _check_witness(witness: Mapping[Key, Fraction], x: KnSym, relator_set: RelatorSet) -> None:
    if pair(witness, x) != 1 or any(pair(witness, r) for r in relator_set.relators):
        raise CertificateError("witness failed verification", dict(witness))


def rank(relator_set: RelatorSet) -> int:
    """Rank over Q of the relator set."""
    return len(relator_set.echelon)


def cocycle_sum(points: Sequence[TorsionPoint]) -> KnSym:
    """Sum over i of (-1)^i {g_a0, ..., omit a_i, ..., g_an}, for a0 = a1 + ... + an."""
    if len(points) < 2:
        raise InputError("cocycle needs a0 and at least one summand", "points")
    if any(p.is_zero() for p in points):
        raise InputError("cocycle points must be nonzero", "points")
    total_point = TorsionPoint.zero()
    for p in points[1:]:
        total_point = total_point + p
    if total_point != points[0]:
        raise InputError("a0 must equal a1 + ... + an", "points")
    n = len(points) - 1
    total = KnSym.zero(n)
    for i in range(len(points)):
        rest = [p for j, p in enumerate(points) if j != i]
        total = total + symbol(*rest).scale((-1) ** i)
    return total
