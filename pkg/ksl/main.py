"""Command-line entry point for ksl."""

import argparse
from collections.abc import Sequence
import json
import sys

from ksl.config.models import RelatorDumpModel
from ksl.config.settings import settings
from ksl.config.validation import EXPAND_KINDS, SUITES, InputValidator
from ksl.errors import CertificateError, InconclusiveError, InputError, KslError
from ksl.runner import SuiteOptions, SuiteRunner
from ksl.services.exactalg import serialize_qexp, serialize_tqexp
from ksl.services.ksymbol import rank, relators
from ksl.services.modsym import xi2, xi_n
from ksl.services.thetasiegel import ntheta_a, siegel_unit, theta_series
from ksl.suites.arithmetic import register_arithmetic_suites
from ksl.suites.symbols import register_symbol_suites
from ksl.utils.helpers import format_fraction
from ksl.utils.logging import configure_logging, logger

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_INCONCLUSIVE = 3

# timing fields vary between runs and stay out of the default report
_TIMING_FIELDS = {"started_at": True, "finished_at": True, "results": {"__all__": {"duration_ms"}}}


def _emit(text: str) -> None:
    sys.stdout.write(text)


def create_runner() -> SuiteRunner:
    """Runner with every suite registered."""
    runner = SuiteRunner()
    register_arithmetic_suites(runner)
    register_symbol_suites(runner)
    return runner


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--trunc", type=str, default=None, help="q-adic precision target p/q")
    common.add_argument("--seed", type=int, default=None, help="Seed for randomized batteries")
    common.add_argument("--tol", type=float, default=None, help="Tolerance of the numeric layer")
    common.add_argument("--jobs", type=int, default=None, help="Checks run in parallel")
    common.add_argument("--level-cap", type=int, default=None, help="Largest level a suite may use")
    common.add_argument(
        "--log-level",
        type=str,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        default=None,
        help="Set logging level",
    )
    common.add_argument("--log-format", type=str, choices=["json", "console"], default=None)

    parser = argparse.ArgumentParser(
        prog="ksl",
        description="Exact Siegel units, K-symbols and modular symbols with machine-checked identities",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    expand = commands.add_parser("expand", parents=[common], help="Print a truncated q-expansion")
    expand.add_argument("kind", choices=EXPAND_KINDS)
    expand.add_argument("coords", nargs="*", help="a1 a2 for siegel")
    expand.add_argument("--N", type=int, default=None)
    expand.add_argument("--a", type=str, default=None, help="torsion point p/q,p/q for ntheta")

    verify = commands.add_parser("verify", parents=[common], help="Run a verification suite")
    verify.add_argument("suite", choices=SUITES)
    verify.add_argument("--N", type=int, default=None)
    verify.add_argument("--n", type=int, default=None)
    verify.add_argument("--timings", action="store_true", help="Keep timestamps and durations in the report")

    evaluate = commands.add_parser("eval", parents=[common], help="Evaluate a modular symbol on a test function")
    evaluate.add_argument("target", choices=["xi2", "xin"])
    evaluate.add_argument("args", nargs="+", help="xi2: r s testfn.json; xin: testfn.json")
    evaluate.add_argument("--matrix", type=str, default=None, help="functionals as rows, e.g. '1,0;0,1'")

    dump = commands.add_parser("relators", parents=[common], help="Dump a relator set and its rank")
    dump.add_argument("--N", type=int, required=True)
    dump.add_argument("--n", type=int, default=2)
    dump.add_argument("--kinds", type=str, default=None, help="comma separated: manin,distribution,product-lift")
    return parser


def apply_overrides(args: argparse.Namespace) -> None:
    """Copy flags onto the global settings; flags win over the environment."""
    if args.trunc is not None:
        value = InputValidator.validate_rational(args.trunc, "trunc")
        if value <= 0:
            raise InputError("trunc must be positive", "trunc")
        settings.trunc = format_fraction(value)
    if args.seed is not None:
        settings.seed = args.seed
    if args.tol is not None:
        if args.tol <= 0:
            raise InputError("tol must be positive", "tol")
        settings.tol = args.tol
    if args.jobs is not None:
        if args.jobs < 1:
            raise InputError("jobs must be at least 1", "jobs")
        settings.jobs = args.jobs
    if args.level_cap is not None:
        settings.level_cap = InputValidator.validate_level(args.level_cap)
    if args.log_level:
        settings.log_level = args.log_level
    if args.log_format:
        settings.log_format = args.log_format
    if args.log_level or args.log_format:
        configure_logging()


def cmd_expand(args: argparse.Namespace) -> int:
    params = InputValidator.validate_expand_params(args.kind, {"coords": args.coords, "N": args.N, "a": args.a})
    T = settings.trunc_value
    if args.kind == "siegel":
        _emit(serialize_qexp(siegel_unit(params["a"], T)))
    elif args.kind == "theta":
        _emit(serialize_tqexp(theta_series(T)))
    else:
        quotient = ntheta_a(params["N"], params["a"], T)
        _emit(f"valuation {format_fraction(quotient.valuation())}\n")
        _emit("numerator\n")
        _emit(serialize_tqexp(quotient.num))
        _emit("denominator\n")
        _emit(serialize_tqexp(quotient.den))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    suite = InputValidator.validate_suite(args.suite)
    options = SuiteOptions(N=args.N, n=args.n, seed=args.seed)
    report = create_runner().run(suite, options)
    exclude = None if args.timings else _TIMING_FIELDS
    _emit(report.model_dump_json(indent=2, exclude=exclude) + "\n")  # type: ignore[arg-type]
    return report.exit_code


def cmd_eval(args: argparse.Namespace) -> int:
    if args.target == "xi2":
        if len(args.args) != 3:
            raise InputError("xi2 takes r s testfn.json", "args")
        r, s = (InputValidator.validate_cusp(c) for c in args.args[:2])
        result = xi2(r, s, InputValidator.load_test_fn(args.args[2]))
    else:
        if len(args.args) != 1 or not args.matrix:
            raise InputError("xin takes --matrix and one testfn.json", "args")
        result = xi_n(InputValidator.validate_matrix(args.matrix), InputValidator.load_test_fn(args.args[0]))
    _emit(result.to_json() + "\n")
    return EXIT_OK


def cmd_relators(args: argparse.Namespace) -> int:
    N = InputValidator.validate_level(args.N)
    n = InputValidator.validate_level(args.n)
    kinds = InputValidator.validate_kinds(args.kinds)
    relator_set = relators(N, n, kinds)
    dump = RelatorDumpModel(
        level=N,
        n=n,
        kinds=list(kinds),
        count=len(relator_set),
        rank=rank(relator_set),
        tags=list(relator_set.tags),
        relators=[r.to_model(N) for r in relator_set.relators],
    )
    _emit(json.dumps(dump.model_dump(), sort_keys=True, indent=2) + "\n")
    return EXIT_OK


COMMANDS = {"expand": cmd_expand, "verify": cmd_verify, "eval": cmd_eval, "relators": cmd_relators}


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run the command and map errors onto exit codes."""
    args = build_parser().parse_args(argv)
    try:
        apply_overrides(args)
        logger.debug("Running command", command=args.command)
        return COMMANDS[args.command](args)
    except InputError as e:
        logger.error("Invalid input", error=str(e), field=e.field)
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    except InconclusiveError as e:
        logger.error("Precision ran short", error=str(e), parameter=e.parameter)
        sys.stderr.write(f"inconclusive: {e}\n")
        return EXIT_INCONCLUSIVE
    except CertificateError as e:
        logger.error("Certificate failed", error=str(e))
        sys.stderr.write(f"failed: {e}\n")
        return EXIT_FAILED
    except KslError as e:
        logger.error("Fatal error in command", error=str(e))
        return EXIT_FAILED


def run() -> None:
    """Console script entry point."""
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        sys.exit(130)


if __name__ == "__main__":
    run()
