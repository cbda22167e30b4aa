"""Tests for cyclotomic numbers and truncated series."""

from fractions import Fraction
import math

import pytest

from ksl.errors import ArithmeticFailure, InconclusiveError
from ksl.services.exactalg import (
    ONE,
    CycNumber,
    QExp,
    TQExp,
    _infconv,
    compare_qexp,
    cyc_arith,
    exp_2pi_i,
    order_at_one,
    parse_cyc,
    parse_qexp,
    qexp_eq,
    serialize_qexp,
    tq_substitute,
    zeta,
)

HALF = Fraction(1, 2)


class TestCycNumber:
    def test_fourth_root_squares_to_minus_one(self) -> None:
        assert zeta(4, 1) ** 2 == -1

    def test_cube_roots_sum(self) -> None:
        assert zeta(3, 1) + zeta(3, 2) == -1

    def test_inverse_round_trip(self) -> None:
        x = ONE + zeta(5, 1)
        assert x * x.inv() == 1

    def test_half_turn_is_minus_one(self) -> None:
        assert zeta(12, 6) == -1
        assert exp_2pi_i(Fraction(1, 2)) == -1

    def test_equality_across_conductors(self) -> None:
        assert zeta(6, 2) == zeta(3, 1)
        assert zeta(12, 4).embed(24) == zeta(3, 1)

    def test_zero_inversion_fails(self) -> None:
        with pytest.raises(ArithmeticFailure):
            CycNumber.rational(0).inv()

    def test_bad_embedding_fails(self) -> None:
        with pytest.raises(ArithmeticFailure):
            zeta(5, 1).embed(12)

    def test_rational_value(self) -> None:
        assert (zeta(8, 1) * zeta(8, 7)).rational_value() == 1
        with pytest.raises(ArithmeticFailure):
            zeta(8, 1).rational_value()

    def test_reduced_coefficients(self) -> None:
        # zeta_3^2 = -1 - zeta_3
        assert zeta(3, 2).coeffs == (Fraction(-1), Fraction(-1))

    def test_format_and_parse(self) -> None:
        x = CycNumber.from_coeffs(5, [Fraction(1, 2), 0, -3])
        assert x.format() == "1/2 + -3*z^2"
        assert parse_cyc(x.format(), 5) == x

    def test_to_complex(self) -> None:
        assert abs(zeta(4, 1).to_complex() - 1j) < 1e-12

    def test_dispatch(self) -> None:
        assert cyc_arith("add", zeta(4, 1), zeta(4, 3)) == 0
        assert cyc_arith("embed", zeta(3, 1), 6) == zeta(6, 2)


class TestQExp:
    def test_geometric_series(self) -> None:
        one_minus_q = QExp.build({Fraction(0): ONE, Fraction(1): -ONE}, None)
        geometric = one_minus_q.inv(10)
        assert geometric.trunc == 10
        assert all(geometric.coeff(k) == 1 for k in range(10))
        assert qexp_eq(one_minus_q * geometric, QExp.one(), 10)

    def test_inverse_of_shifted_series(self) -> None:
        f = QExp.build({Fraction(1, 12): ONE, Fraction(13, 12): ONE}, None)
        g = f.inv(5)
        assert g.val() == Fraction(-1, 12)
        assert g.coeff(Fraction(-1, 12) + 3) == -1
        assert g.trunc == 5

    def test_inverse_of_exact_binomial_needs_trunc(self) -> None:
        with pytest.raises(ArithmeticFailure):
            QExp.build({Fraction(0): ONE, Fraction(1): ONE}, None).inv()

    def test_exact_monomial_inverse(self) -> None:
        g = QExp.monomial(2, Fraction(1, 3)).inv()
        assert g.is_exact()
        assert g.coeff(Fraction(-1, 3)) == Fraction(1, 2)

    def test_multiplication_truncation(self) -> None:
        f = QExp.build({Fraction(0): ONE, Fraction(1): ONE}, Fraction(3))
        g = QExp.build({Fraction(1): ONE}, Fraction(2))
        # min(3 + 1, 2 + 0)
        assert (f * g).trunc == 2

    def test_tau_shift(self) -> None:
        f = QExp.monomial(1, Fraction(1, 12))
        assert f.tau_shift().coeff(Fraction(1, 12)) == zeta(12, 1)

    def test_coefficient_beyond_truncation(self) -> None:
        f = QExp.build({Fraction(0): ONE}, Fraction(2))
        with pytest.raises(InconclusiveError):
            f.coeff(3)

    def test_three_valued_equality(self) -> None:
        f = QExp.build({Fraction(0): ONE, Fraction(1): ONE}, Fraction(2))
        g = QExp.build({Fraction(0): ONE, Fraction(1): ONE, Fraction(3): ONE}, None)
        h = QExp.build({Fraction(0): ONE, Fraction(1): CycNumber.rational(2)}, None)
        assert qexp_eq(f, g, 1)
        assert not qexp_eq(f, h, 1)
        with pytest.raises(InconclusiveError):
            qexp_eq(f, g, 3)
        comparison = compare_qexp(f, h)
        assert comparison.first_difference == 1

    def test_serialization_round_trip(self) -> None:
        f = QExp.build({Fraction(-1, 24): ONE, Fraction(1, 2): -zeta(3, 1)}, Fraction(4))
        text = serialize_qexp(f)
        assert text.splitlines()[0] == "conductor 3, trunc 4"
        assert qexp_eq(parse_qexp(text), f, 4)

    def test_evaluate(self) -> None:
        f = QExp.build({Fraction(0): ONE, Fraction(1): ONE}, None)
        assert f.evaluate(1j) == pytest.approx(1 + math.exp(-2 * math.pi))


class TestTQExp:
    def test_substitute_monomial(self) -> None:
        f = TQExp.monomial(1, HALF, 0)
        moved = tq_substitute(f, 1, 0)
        assert moved.coeff(HALF, HALF) == 1
        flipped = tq_substitute(f, 0, 1)
        assert flipped.coeff(HALF, 0) == -1

    def test_substitute_without_envelope_fails(self) -> None:
        f = TQExp.build({(HALF, Fraction(0)): ONE}, Fraction(3))
        with pytest.raises(ArithmeticFailure):
            tq_substitute(f, 1, 0)

    def test_envelope_of_product(self) -> None:
        theta_like = (Fraction(-1, 24), Fraction(0), HALF)
        assert _infconv(theta_like, theta_like) == (Fraction(-1, 12), Fraction(0), Fraction(1, 4))

    def test_mul_monomial_shifts_envelope(self) -> None:
        f = TQExp.build({(HALF, Fraction(1, 12)): ONE}, Fraction(3), 2, (Fraction(-1, 24), Fraction(0), HALF))
        g = f.mul_monomial(-1, -1, Fraction(-1, 2))
        assert g.envelope == (Fraction(-1, 24), Fraction(1), HALF)
        assert g.coeff(-HALF, Fraction(-5, 12)) == -1
        assert g.trunc == Fraction(5, 2)

    def test_order_at_one(self) -> None:
        simple = TQExp.build({(HALF, Fraction(0)): ONE, (-HALF, Fraction(0)): -ONE}, None)
        assert order_at_one(simple) == 1
        assert order_at_one(simple * simple) == 2
        assert order_at_one(TQExp.monomial(1, 1, 0)) == 0

    def test_specialize_and_scale(self) -> None:
        f = TQExp.build({(HALF, Fraction(0)): ONE, (Fraction(-3, 2), Fraction(1)): ONE}, None)
        assert f.specialize_t_one().coeff(1) == 1
        assert f.scale_t(2).coeff(Fraction(-3), Fraction(1)) == 1
