"""Series-level suites: theta transformation, Siegel units, numerics and residues."""

from collections.abc import Iterator
from functools import partial
from itertools import combinations, product

from ksl.config.settings import settings
from ksl.errors import InputError
from ksl.runner import Check, SuiteOptions, SuiteRunner
from ksl.services.kresidue import verify_boundary_identities
from ksl.services.numeric import (
    check_layer_agreement,
    expected_epsilon,
    measure_epsilon,
    verify_eta_psi,
    verify_S_transform,
)
from ksl.services.thetasiegel import (
    TorsionPoint,
    torsion_points,
    verify_distribution,
    verify_divisor,
    verify_invariance,
    verify_negation,
    verify_restriction,
    verify_restriction_shifted,
    verify_siegel_link,
    verify_transform,
    verify_transform_composition,
)

# (u, tau) pairs with Im(tau) and Im(-1/tau) well inside the convergence region
SAMPLE_POINTS: tuple[tuple[complex, complex], ...] = (
    (0.21 + 0.05j, 1.7j),
    (0.3 + 0.1j, 2j),
    (0.1 + 0.02j, 1.3j),
    (0.15 + 0j, 0.3 + 1.5j),
    (0.05 + 0.03j, 1.2j),
)
SAMPLE_TAUS: tuple[complex, ...] = (1j, 2j, 0.3 + 1.5j)


def _level(options: SuiteOptions, default: int, minimum: int = 1) -> int:
    N = options.N or default
    if N < minimum:
        raise InputError(f"this suite needs N >= {minimum}", "N")
    if N > settings.level_cap:
        raise InputError(f"N = {N} exceeds level_cap = {settings.level_cap}", "N")
    return N


def _epsilon_matches(generator: str, N: int) -> bool:
    measured = measure_epsilon(generator, N)
    return measured.k == expected_epsilon(generator, N) and measured.residual <= 1e-6


def register_arithmetic_suites(runner: SuiteRunner) -> None:
    """Register the theta, siegel, numeric and residue suites."""

    @runner.suite("theta")
    def theta_checks(options: SuiteOptions) -> Iterator[Check]:
        T = settings.trunc_value
        cap = settings.transform_cap
        for r, s in product(range(-cap, cap + 1), repeat=2):
            yield Check("theta", f"transform({r},{s})", "theta.transformation-law", partial(verify_transform, r, s, T))
        yield Check("theta", "factor-composition", "theta.transformation-law", verify_transform_composition)
        for N in range(1, _level(options, 3) + 1):
            for gen in (("translate", (1, 0)), ("translate", (0, 1)), ("T", None)):
                yield Check("theta", f"invariance {gen[0]}{gen[1] or ''} N={N}", "theta.level-N-invariance", partial(verify_invariance, gen, N, T))  # type: ignore[arg-type]

    @runner.suite("siegel")
    def siegel_checks(options: SuiteOptions) -> Iterator[Check]:
        T = settings.trunc_value
        top = _level(options, 3, minimum=2)
        for N in range(2, top + 1):
            points = torsion_points(N, include_zero=False)
            for a in points:
                if a.level != N:
                    continue
                yield Check("siegel", f"link{a}", "siegel.theta-link", partial(verify_siegel_link, a, T))
                yield Check("siegel", f"negation{a}", "siegel.negation", partial(verify_negation, a, T))
                for t in (2, 3):
                    if N * t <= settings.distribution_cap:
                        yield Check("siegel", f"distribution{a} t={t}", "siegel.distribution", partial(verify_distribution, a, t, T))
                yield Check("siegel", f"divisor{a} N={N}", "theta.divisor", partial(verify_divisor, N, a, T))
            for a, b in combinations(points, 2):
                yield Check("siegel", f"restriction{a}{b} N={N}", "theta.restriction", partial(verify_restriction, a, b, N, T))
            if len(points) >= 3:
                a, b, x = points[0], points[1], points[-1]
                yield Check("siegel", f"restriction-shifted{a}{b}{x} N={N}", "theta.restriction", partial(verify_restriction_shifted, a, b, x, N, T))
        for t in (2, 3):
            yield Check("siegel", f"distribution(0,0) t={t}", "siegel.distribution", partial(verify_distribution, TorsionPoint.zero(), t, T))

    @runner.suite("numeric")
    def numeric_checks(options: SuiteOptions) -> Iterator[Check]:
        top = _level(options, 3)
        for N in range(1, top + 1):
            for u, tau in SAMPLE_POINTS:
                yield Check("numeric", f"S-transform N={N} u={u} tau={tau}", "theta.level-N-invariance", partial(verify_S_transform, u, tau, N))
        for N in range(1, max(top, 6) + 1):
            for generator in ("T", "S"):
                yield Check("numeric", f"epsilon({generator}) N={N}", "theta.character", partial(_epsilon_matches, generator, N))
        for tau in SAMPLE_TAUS:
            yield Check("numeric", f"eta-psi tau={tau}", "theta.eta-psi", partial(verify_eta_psi, tau))
        for a in (TorsionPoint.of("1/3", 0), TorsionPoint.of("1/4", "1/2")):
            yield Check("numeric", f"layer-agreement{a}", "numeric.cross-layer", partial(check_layer_agreement, a, 2j, settings.trunc_value))

    @runner.suite("residue")
    def residue_checks(options: SuiteOptions) -> Iterator[Check]:
        if settings.level_cap < 3:
            raise InputError("residue suites need level_cap >= 3", "level_cap")
        N = _level(options, 3, minimum=3)
        points = torsion_points(N)
        # a, b, c, x distinct with x the zero point, plus one configuration off zero
        configurations = [(points[1], points[N], points[N + 1], points[0])]
        if len(points) > 5:
            configurations.append((points[0], points[2], points[N + 2], points[-1]))
        for a, b, c, x in configurations:
            if len({a, b, c, x}) < 4:
                continue
            yield Check("residue", f"boundaries{a}{b}{c}{x} N={N}", "residue.boundary-identities", partial(verify_boundary_identities, N, a, b, c, x))
