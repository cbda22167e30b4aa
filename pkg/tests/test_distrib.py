"""Tests for lattices, coset test functions and the distributions."""

from fractions import Fraction

import pytest

from ksl.errors import InputError
from ksl.services.distrib import (
    Coset,
    LatticeQ,
    TestFn,
    coset_decompose,
    minimal_r,
    mu1,
    mu_n,
    pullback,
    sample_points,
    verify_mu_welldef,
)
from ksl.services.ksymbol import K1El, ksym, symbol
from ksl.services.thetasiegel import TorsionPoint

P = TorsionPoint.of
Z2 = LatticeQ.scaled(1, 2)
L23 = LatticeQ.from_rows([[2, 0], [0, 3]])


def indicator(shift: list[str | int], lattice: LatticeQ | None = None) -> TestFn:
    return TestFn.indicator(Coset.of(shift, lattice))


class TestLattice:
    def test_canonical_basis(self) -> None:
        assert LatticeQ.from_rows([[1, 1], [0, 1]]) == Z2
        assert LatticeQ.from_rows([["1/2", 0], [0, "1/2"]]) == LatticeQ.scaled(Fraction(1, 2), 2)

    def test_singular_basis(self) -> None:
        with pytest.raises(InputError):
            LatticeQ.from_rows([[1, 2], [2, 4]])

    @pytest.mark.parametrize(
        ("lattice", "expected"),
        [(Z2, Fraction(1)), (L23, Fraction(6)), (LatticeQ.scaled(Fraction(1, 2), 2), Fraction(1, 2))],
    )
    def test_minimal_r(self, lattice: LatticeQ, expected: Fraction) -> None:
        assert minimal_r(lattice) == expected

    def test_contains(self) -> None:
        assert L23.contains([Fraction(4), Fraction(-3)])
        assert not L23.contains([Fraction(1), Fraction(0)])


class TestCosets:
    def test_shift_is_reduced(self) -> None:
        assert Coset.of(["4/3", -1]) == Coset.of(["1/3", 0])

    def test_decompose_index_four(self) -> None:
        assert len(coset_decompose(Coset.of([0, 0]), 2)) == 4

    def test_decompose_trivial(self) -> None:
        c = Coset.of(["1/3", 0])
        assert coset_decompose(c, 1) == [c]

    def test_decompose_by_covolume(self) -> None:
        pieces = coset_decompose(Coset.of([0, 0], L23), 6)
        assert len(pieces) == LatticeQ.scaled(6, 2).covolume / L23.covolume == 6

    def test_decompose_needs_containment(self) -> None:
        with pytest.raises(InputError):
            coset_decompose(Coset.of([0, 0]), Fraction(1, 2))

    def test_partition_is_exact(self) -> None:
        phi = indicator(["1/2", 1], L23)
        pieces = TestFn.from_terms(2, [(c, 1) for c in coset_decompose(next(iter(phi.terms)), 6)])
        assert pieces == phi
        for point in sample_points([phi, pieces]):
            assert phi.value(point) == pieces.value(point)


class TestTestFn:
    def test_canonical_is_idempotent(self) -> None:
        phi = indicator(["1/3", 0]) + indicator([0, "1/4"], LatticeQ.from_rows([[2, 0], [0, 1]])).scale(2)
        once = phi.canonical()
        assert once.canonical() == once
        assert dict(once.canonical().terms) == dict(once.terms)
        assert once == phi

    def test_json_round_trip(self) -> None:
        phi = indicator(["1/3", 0], L23).scale(-3) + indicator([0, "1/5"])
        assert TestFn.from_json(phi.to_model().model_dump_json()) == phi

    def test_malformed_json(self) -> None:
        with pytest.raises(InputError):
            TestFn.from_json('{"dim": 2, "terms": [{"coef": 1, "shift": ["a", "0"], "lattice": [["1", "0"], ["0", "1"]]}]}')


class TestPullback:
    phi = indicator(["1/3", 0]) + indicator([0, "1/4"], L23).scale(2)

    def test_identity(self) -> None:
        assert pullback(self.phi, [[1, 0], [0, 1]]) == self.phi

    def test_scaling(self) -> None:
        expected = indicator([0, 0], LatticeQ.scaled(Fraction(1, 2), 2))
        assert pullback(indicator([0, 0]), [[2, 0], [0, 2]]) == expected

    def test_composition_with_inverse(self) -> None:
        M = [[2, 1], [1, 1]]
        M_inv = [[1, -1], [-1, 2]]
        assert pullback(pullback(self.phi, M), M_inv) == self.phi

    def test_singular(self) -> None:
        with pytest.raises(InputError):
            pullback(self.phi, [[1, 1], [1, 1]])


class TestMu:
    def test_mu1_on_unit_lattice(self) -> None:
        assert mu1(indicator(["1/3", 0])) == K1El.of(P("1/3", 0))

    def test_mu1_on_scaled_lattice(self) -> None:
        assert mu1(indicator(["1/3", 0], LatticeQ.scaled(2, 2))) == K1El.of(P("1/6", 0))

    def test_mu1_of_zero_coset(self) -> None:
        assert mu1(indicator([0, 0])).is_zero()

    @pytest.mark.parametrize("t", [1, -1, 2, -2, Fraction(1, 3)])
    def test_mu1_scaling_invariance(self, t: Fraction | int) -> None:
        phi = indicator(["1/3", 0]) + indicator([0, "1/4"], LatticeQ.from_rows([[2, 0], [0, 1]])).scale(2)
        assert mu1(pullback(phi, [[t, 0], [0, t]])) == mu1(phi)

    def test_mu1_rejects_other_dimensions(self) -> None:
        with pytest.raises(InputError):
            mu1(indicator([0, 0, 0, 0]))

    def test_mu2_product_coset(self) -> None:
        phi = indicator(["1/3", 0, 0, "1/3"], LatticeQ.scaled(1, 4))
        assert mu_n(phi, 2) == symbol(P("1/3", 0), P(0, "1/3"))

    def test_mu2_repeated_row(self) -> None:
        phi = indicator(["1/3", 0, "1/3", 0], LatticeQ.scaled(1, 4))
        assert mu_n(phi, 2).is_zero()

    def test_mu3_matches_factors(self) -> None:
        factors = [indicator(["1/5", 0]), indicator([0, "2/5"]), indicator(["3/5", "1/5"])]
        phi = factors[0].tensor(factors[1]).tensor(factors[2])
        assert mu_n(phi, 3) == ksym([mu1(f) for f in factors])

    def test_mu_n_dimension_check(self) -> None:
        with pytest.raises(InputError):
            mu_n(indicator([0, 0]), 2)


class TestWellDefined:
    def test_zero_coset(self) -> None:
        assert verify_mu_welldef(indicator([0, 0]), 1, 2, T=2)

    def test_third_point(self) -> None:
        assert verify_mu_welldef(indicator(["1/3", 0]), 1, 3, T=2)

    def test_equal_refinements(self) -> None:
        assert verify_mu_welldef(indicator(["1/3", 0], L23), 6, 6)

    def test_refinement_must_be_contained(self) -> None:
        with pytest.raises(InputError):
            verify_mu_welldef(indicator(["1/3", 0], L23), 1, 6)
