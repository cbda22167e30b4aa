"""Tests for the floating-point layer."""

from fractions import Fraction
import math

import numpy as np
import pytest

from ksl.errors import InconclusiveError, InputError
from ksl.services.numeric import (
    check_layer_agreement,
    eta_num,
    expected_epsilon,
    measure_epsilon,
    psi_num,
    siegel_num,
    snap_root_of_unity,
    theta_num,
    verify_eta_psi,
    verify_S_transform,
)
from ksl.services.thetasiegel import TorsionPoint

P = TorsionPoint.of


class TestThetaNum:
    def test_half_period_value(self) -> None:
        result = theta_num(0.5, 1j, 40)
        n = np.arange(1, 41)
        expected = 2j * math.exp(-math.pi / 6) * np.prod((1 + np.exp(-2 * math.pi * n)) ** 2)
        assert abs(result.value - expected) <= result.bound + 1e-14

    def test_odd_under_unit_shift(self) -> None:
        u, tau = 0.3 + 0.1j, 2j
        assert abs(theta_num(u + 1, tau).value + theta_num(u, tau).value) < 1e-12

    def test_zero_on_lattice(self) -> None:
        result = theta_num(0, 2j)
        assert abs(result.value) <= result.bound + 1e-15

    def test_rejects_large_nome(self) -> None:
        with pytest.raises(InputError):
            theta_num(0.1, 0.05j)

    def test_rejects_bad_nmax(self) -> None:
        with pytest.raises(InputError):
            theta_num(0.1, 1j, 0)

    def test_wide_u_keeps_early_factors_exactly(self) -> None:
        # S-image of 5 (0.21 + 0.05i) at tau = 1.7i: |t| is near 48 while |q| is near 0.025
        u, tau = 5 * (0.21 + 0.05j) / -1.7j, -1 / 1.7j
        result = theta_num(u, tau)
        shifted = theta_num(u + 1, tau)
        assert result.relative_bound < 1e-12
        assert abs(shifted.value + result.value) <= result.bound + shifted.bound + 1e-12 * abs(result.value)

    def test_tail_that_cannot_contract_is_inconclusive(self) -> None:
        with pytest.raises(InconclusiveError):
            theta_num(3j, 1j, 1)


class TestTransforms:
    def test_s_transform_level_two(self) -> None:
        assert verify_S_transform(0.21 + 0.05j, 1.7j, 2, 1e-9)

    def test_s_transform_level_five(self) -> None:
        assert verify_S_transform(0.21 + 0.05j, 1.7j, 5, 1e-9)

    def test_s_transform_level_three(self) -> None:
        # i^8 = 1
        assert verify_S_transform(0.21 + 0.05j, 1.7j, 3, 1e-9)

    def test_psi_is_minus_i(self) -> None:
        assert psi_num(0, 1j) == pytest.approx(-1j, abs=1e-10)
        assert psi_num(0.1 + 0.02j, 1.3j) == pytest.approx(-1j, abs=1e-9)

    @pytest.mark.parametrize(("tau", "tol"), [(1j, 1e-10), (2j, 1e-9), (0.3 + 1.5j, 1e-8)])
    def test_eta_psi(self, tau: complex, tol: float) -> None:
        assert verify_eta_psi(tau, tol)

    def test_eta_at_i(self) -> None:
        # eta(i) = Gamma(1/4) / (2 pi^(3/4))
        assert eta_num(1j).value.real == pytest.approx(math.gamma(0.25) / (2 * math.pi**0.75), rel=1e-12)

    def test_tolerance_below_bound_is_inconclusive(self) -> None:
        with pytest.raises(InconclusiveError):
            verify_S_transform(0.21 + 0.05j, 1.7j, 2, 1e-30, nmax=1)


class TestRootsOfUnity:
    def test_snap(self) -> None:
        snapped = snap_root_of_unity(1j * (1 + 1e-12), 12)
        assert snapped.k == 3
        assert snapped.exponent == Fraction(1, 4)
        assert snapped.residual < 1e-11

    def test_snap_rejects_zero(self) -> None:
        with pytest.raises(InputError):
            snap_root_of_unity(0)

    @pytest.mark.parametrize("N", [1, 2, 3, 4, 5, 6])
    @pytest.mark.parametrize("generator", ["T", "S"])
    def test_character_matches(self, generator: str, N: int) -> None:
        snapped = measure_epsilon(generator, N)
        assert snapped.k == expected_epsilon(generator, N)
        assert snapped.residual < 1e-6


class TestSiegelNum:
    def test_zero_point(self) -> None:
        assert siegel_num(TorsionPoint.zero(), 2j).value == 1

    @pytest.mark.parametrize(
        "a",
        [P("1/2", 0), P(0, "1/2"), P("1/2", "1/2"), P("1/3", 0), P(0, "1/3"), P("1/3", "2/3"), P("1/4", "1/4"), P("3/4", 0), P("1/5", "2/5"), P("1/6", "5/6")],
    )
    def test_exact_and_numeric_layers_agree(self, a: TorsionPoint) -> None:
        assert check_layer_agreement(a, 2j, Fraction(3), 1e-9)
