"""Tests for the residue model and the derivation of the Manin relations."""

from fractions import Fraction

import pytest
from pytest_mock import MockerFixture

from ksl.config.settings import settings
from ksl.errors import CertificateError, InputError
from ksl.services import kresidue
from ksl.services.kresidue import (
    ThetaMonomial,
    boundary,
    derive_manin,
    residue_sum,
    restrict,
    theta_combination,
    theta_quot,
    verify_boundary_identities,
)
from ksl.services.ksymbol import K1El, KnSym, in_span, manin_relator, relators, theta_expr
from ksl.services.thetasiegel import TorsionPoint, torsion_points

P = TorsionPoint.of
A, B, C, X = P("1/3", 0), P(0, "1/3"), P("1/3", "1/3"), P("2/3", 0)


class TestThetaQuot:
    def test_valuations(self) -> None:
        f = theta_quot(3, A, X)
        assert f.valuation(A) == 108
        assert f.valuation(X) == -108
        assert f.valuation(B) == 0

    def test_degree_zero(self) -> None:
        f = theta_quot(5, P("1/5", 0), P("2/5", "3/5"))
        assert sum(f.valuation(w) for w in torsion_points(5)) == 0

    def test_rejects_small_level(self) -> None:
        with pytest.raises(InputError):
            theta_quot(2, P("1/2", 0), P(0, "1/2"))

    def test_rejects_equal_points(self) -> None:
        with pytest.raises(InputError):
            theta_quot(3, A, A)

    def test_exponents_must_sum_to_zero(self) -> None:
        with pytest.raises(InputError):
            ThetaMonomial(3, {A: Fraction(1)})


class TestRestrict:
    def test_off_the_divisor(self) -> None:
        assert restrict(theta_quot(3, A, X), C) == K1El.from_points([(C - A, 108), (C - X, -108)])

    def test_on_the_divisor_needs_reference(self) -> None:
        with pytest.raises(InputError):
            restrict(theta_quot(3, A, X), A)

    def test_unit_part_of_itself(self) -> None:
        f = theta_quot(3, A, X)
        assert restrict(f, A, reference=f).is_zero()

    def test_reference_must_be_singular(self) -> None:
        with pytest.raises(InputError):
            restrict(theta_quot(3, A, X), A, reference=theta_quot(3, B, C))


class TestBoundary:
    fs = [theta_quot(3, p, X) for p in (A, B, C)]

    def test_vanishes_away_from_the_support(self) -> None:
        assert boundary(self.fs, TorsionPoint.zero()).is_zero()

    def test_uniformizer_independence(self) -> None:
        default = boundary(self.fs, X)
        assert boundary(self.fs, X, reference=self.fs[1]) == default
        assert boundary(self.fs, X, reference=self.fs[0] * self.fs[2]) == default

    def test_rejects_different_poles(self) -> None:
        fs = [theta_quot(3, A, X), theta_quot(3, B, X), theta_quot(3, X, C)]
        with pytest.raises(InputError):
            boundary(fs, A)

    def test_identities_level_three(self) -> None:
        assert verify_boundary_identities(3, A, B, C, X)

    def test_identities_level_five(self) -> None:
        assert verify_boundary_identities(5, P("1/5", 0), P("2/5", "1/5"), P(0, "3/5"), P("4/5", "4/5"))

    def test_residue_sum_matches_theta_combination(self) -> None:
        assert residue_sum(3, A, B, C, X) == theta_combination(A, B, C, X).scale(108**3)

    def test_residue_sum_allows_zero_pole(self) -> None:
        zero = TorsionPoint.zero()
        assert residue_sum(3, A, B, C, zero) == theta_combination(A, B, C, zero).scale(108**3)

    def test_cyclic_permutation(self) -> None:
        assert residue_sum(3, B, C, A, X) == residue_sum(3, A, B, C, X)

    def test_coincident_points(self) -> None:
        with pytest.raises(InputError):
            residue_sum(3, A, A, C, X)


class TestDeriveManin:
    def test_level_three(self) -> None:
        a, b, c = P("1/3", 0), P(0, "1/3"), P("2/3", "2/3")
        relator = derive_manin(3, a, b, c)
        assert relator == manin_relator(a, b, c)
        assert not relator.is_zero()

    def test_theta_form_is_in_manin_span(self) -> None:
        theta = theta_expr(TorsionPoint.zero(), P("1/3", 0), P("1/3", "2/3"))
        assert in_span(theta, relators(3, 2, ["manin"])).member

    def test_level_two_lifts_to_four(self) -> None:
        a, b, c = P(0, "1/2"), P("1/2", 0), P("1/2", "1/2")
        relator = derive_manin(2, a, b, c)
        assert len(relator.terms) == 3

    def test_lift_compares_against_level_four_products(self, mocker: MockerFixture) -> None:
        spy = mocker.spy(kresidue, "verify_distribution")
        a, b, c = P(0, "1/2"), P("1/2", 0), P("1/2", "1/2")
        derive_manin(2, a, b, c)
        assert [call.args[:2] for call in spy.call_args_list] == [(a, 2), (b, 2), (c, 2)]
        assert all(call.args[2] == settings.trunc_value for call in spy.call_args_list)

    def test_broken_lift_is_refuted(self, mocker: MockerFixture) -> None:
        mocker.patch("ksl.services.kresidue.verify_distribution", return_value=False)
        with pytest.raises(CertificateError):
            derive_manin(2, P(0, "1/2"), P("1/2", 0), P("1/2", "1/2"))

    def test_level_five(self) -> None:
        a, b = P("1/5", "2/5"), P("3/5", 0)
        assert not derive_manin(5, a, b, -(a + b)).is_zero()

    def test_level_one_is_trivial(self) -> None:
        zero = TorsionPoint.zero()
        assert derive_manin(1, zero, zero, zero) == KnSym.zero(2)

    def test_rejects_nonzero_sum(self) -> None:
        with pytest.raises(InputError):
            derive_manin(3, P("1/3", 0), P(0, "1/3"), P("1/3", "1/3"))
