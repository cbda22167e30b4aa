"""Symbol-level suites: Manin relations, cocycles, distributions and modular symbols."""

from collections.abc import Iterator
from fractions import Fraction
from functools import cache, partial
import random

from ksl.config.settings import settings
from ksl.errors import InputError
from ksl.runner import Check, SuiteOptions, SuiteRunner
from ksl.services.distrib import Coset, TestFn, coset_decompose, mu1, pullback, sample_points, verify_mu_welldef
from ksl.services.kresidue import derive_manin
from ksl.services.ksymbol import RelatorKind, cocycle_sum, in_span, manin_relator, rank, relators
from ksl.services.modsym import (
    Cusp,
    agree,
    product_test_fn,
    row_action,
    verify_axioms,
    verify_cgcom,
    verify_manin_modsym,
    verify_torus_independence,
    xi2,
)
from ksl.services.thetasiegel import TorsionPoint, torsion_points
from ksl.utils.helpers import seeded_rng

COCYCLE_SAMPLES = 20

MODSYM_TRIANGLES = (("inf", "0", "1"), ("inf", "0", "-1"), ("0", "1", "inf"), ("inf", "1/2", "1"))
MODSYM_LAMBDAS = (((1, 0), (0, 1)), ((1, 0), (1, 1)), ((0, 1), (1, 0)), ((2, 1), (1, 1)), ((1, 2), (2, 4)))
SL2_GENERATORS = {
    "T": ((Fraction(1), Fraction(1)), (Fraction(0), Fraction(1))),
    "S": ((Fraction(0), Fraction(-1)), (Fraction(1), Fraction(0))),
}


def _level(options: SuiteOptions, default: int) -> int:
    N = options.N or default
    if N > settings.level_cap:
        raise InputError(f"N = {N} exceeds level_cap = {settings.level_cap}", "N")
    return N


def manin_triples(N: int) -> list[tuple[TorsionPoint, TorsionPoint, TorsionPoint]]:
    """Nonzero a, b, c in A(N) with a + b + c = 0, one per cyclic class."""
    triples = []
    points = torsion_points(N, include_zero=False)
    for a in points:
        for b in points:
            c = -(a + b)
            if c.is_zero():
                continue
            if (a, b, c) == min((a, b, c), (b, c, a), (c, a, b)):
                triples.append((a, b, c))
    return triples


def _manin_certified(N: int, a: TorsionPoint, b: TorsionPoint, c: TorsionPoint) -> bool:
    return derive_manin(N, a, b, c) == manin_relator(a, b, c)


def _single_manin_relation() -> bool:
    return rank(relators(2, 2, ["manin"])) == 1


def cocycle_tuples(N: int, n: int, count: int, rng: random.Random) -> list[tuple[TorsionPoint, ...]]:
    """Distinct (a0, a1, ..., an) with a0 = a1 + ... + an, the ai drawn with repetition from nonzero A(N)."""
    points = torsion_points(N, include_zero=False)
    chosen: dict[tuple[TorsionPoint, ...], None] = {}
    for _ in range(50 * count if points else 0):
        if len(chosen) == count:
            break
        summands = tuple(rng.choice(points) for _ in range(n))
        total = TorsionPoint.zero()
        for p in summands:
            total = total + p
        if not total.is_zero():
            chosen.setdefault((total, *summands))
    return list(chosen)


def _cocycle_in_span(points: tuple[TorsionPoint, ...], N: int) -> bool:
    n = len(points) - 1
    kinds: list[RelatorKind] = ["manin"] if n == 2 else ["product-lift"]
    return in_span(cocycle_sum(points), relators(N, n, kinds)).member


def _indicator(a: TorsionPoint) -> TestFn:
    return TestFn.indicator(Coset.of([a.a1, a.a2]))


def _mu1_scaling(phi: TestFn, t: int) -> bool:
    return mu1(pullback(phi, [[t, 0], [0, t]])) == mu1(phi)


def _partition_exact(phi: TestFn, r: int) -> bool:
    pieces = TestFn.from_terms(
        phi.dim, [(piece, coef) for coset, coef in phi.terms.items() for piece in coset_decompose(coset, r)]
    )
    return pieces == phi and all(phi.value(p) == pieces.value(p) for p in sample_points([phi, pieces]))


def _manin_modsym(r: Cusp, s: Cusp, t: Cusp, phi: TestFn) -> bool:
    return all(certificate.member for certificate in verify_manin_modsym(r, s, t, phi))


def _xi2_equivariant(r: Cusp, s: Cusp, phi: TestFn, gamma: tuple[tuple[Fraction, ...], ...]) -> bool:
    moved = xi2(r.act(gamma), s.act(gamma), phi)
    return agree(moved, xi2(r, s, pullback(phi, row_action(gamma))), ["distribution"]).member


def register_symbol_suites(runner: SuiteRunner) -> None:
    """Register the manin, cocycle, mu, modsym and axioms suites."""

    @runner.suite("manin")
    def manin_checks(options: SuiteOptions) -> Iterator[Check]:
        N = _level(options, 3)
        if N == 2:
            yield Check("manin", "single relation at level 2", "manin.level-two", _single_manin_relation)
        for a, b, c in manin_triples(N):
            yield Check("manin", f"derive{a}{b}{c} N={N}", "manin.residue-derivation", partial(_manin_certified, N, a, b, c))

    @runner.suite("cocycle")
    def cocycle_checks(options: SuiteOptions) -> Iterator[Check]:
        n = options.n or 2
        if n not in (2, 3):
            raise InputError("cocycle suite runs for n = 2 or 3", "n")
        N = _level(options, 3 if n == 2 else 4)
        for points in cocycle_tuples(N, n, COCYCLE_SAMPLES, seeded_rng(options.seed)):
            label = "".join(str(p) for p in points)
            yield Check("cocycle", f"cocycle {label} N={N}", "symbols.cocycle", partial(_cocycle_in_span, points, N))

    @runner.suite("mu")
    def mu_checks(options: SuiteOptions) -> Iterator[Check]:
        N = _level(options, 3)
        for a in torsion_points(N):
            phi = _indicator(a)
            for t in (2, 3):
                if N * t <= settings.distribution_cap:
                    yield Check("mu", f"well-defined{a} r=1,{t}", "distribution.well-defined", partial(verify_mu_welldef, phi, 1, t))
            for t in (-1, 2):
                yield Check("mu", f"scaling{a} t={t}", "distribution.scaling", partial(_mu1_scaling, phi, t))
            yield Check("mu", f"partition{a}", "distribution.partition", partial(_partition_exact, phi, 2))

    @runner.suite("modsym")
    def modsym_checks(options: SuiteOptions) -> Iterator[Check]:
        N = _level(options, 3)
        phi = TestFn.indicator(Coset.of([Fraction(1, N), 0, 0, Fraction(1, N)]))
        psi = product_test_fn([Fraction(1, N), 0], [0, Fraction(1, N)])
        for triangle in MODSYM_TRIANGLES:
            r, s, t = (Cusp.parse(c) for c in triangle)
            yield Check("modsym", f"manin {r},{s},{t}", "modsym.manin-relations", partial(_manin_modsym, r, s, t, phi))
        inf, zero = Cusp.infinity(), Cusp(0, 1)
        for torus in ((-1, 1), (2, 1), (1, 3)):
            yield Check("modsym", f"torus {torus}", "modsym.torus-independence", partial(verify_torus_independence, inf, zero, phi, torus))
        for name, gamma in SL2_GENERATORS.items():
            yield Check("modsym", f"equivariance {name}", "modsym.equivariance", partial(_xi2_equivariant, inf, zero, phi, gamma))
        for lam in MODSYM_LAMBDAS:
            yield Check("modsym", f"compatibility {lam}", "modsym.gl2-compatibility", partial(verify_cgcom, lam, psi))

    @runner.suite("axioms")
    def axiom_checks(options: SuiteOptions) -> Iterator[Check]:
        n = options.n or 2
        N = _level(options, 3)
        battery = cache(partial(verify_axioms, n, N, options.seed))
        for key in ("equivariance", "homogeneity", "antisymmetry", "degeneracy", "cocycle_general", "cocycle_degenerate"):
            yield Check("axioms", f"{key} n={n} N={N}", f"axioms.{key}", partial(lambda k: battery()[k], key))
