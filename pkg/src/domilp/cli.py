"""Command-line front end.

    domilp solve FILE [--strategy auto|mitm|brute] [--epsilon R] [--t INT] [--cutoff INT]
                      [--practical] [--stats] [--objective w1,w2,...]
    domilp generate --vars N --constraints M --seed S [--coeff-min I] [--coeff-max I]
                    [--planted] --out FILE
    domilp check FILE
    domilp bench --vars LO..HI --ratio C --trials T --seed S [--mode uniform|planted] --csv FILE

Reports go to stdout as JSON, diagnostics to stderr.  Exit codes: 0 feasible
(or success), 1 infeasible, 2 parse/validation/flag error, 3 capacity or
overflow risk.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction

from .bench import VerdictMismatch, run_bench, write_csv
from .errors import CapacityError, ContractError, InstanceFormatError, OverflowRiskError
from .ilp import optimize, side_sizes, solve_feasibility, validate_no_overflow
from .instances import GenSpec, generate, read_instance, serialize
from .vecdom import SolverParams, default_params, practical_params

EXIT_FEASIBLE = 0
EXIT_INFEASIBLE = 1
EXIT_INVALID = 2
EXIT_CAPACITY = 3

log = logging.getLogger("domilp")


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from None


def _range(text: str) -> range:
    lo, sep, hi = text.partition("..")
    try:
        lo_i = int(lo)
        hi_i = int(hi) if sep else lo_i
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO..HI, got {text!r}") from None
    if lo_i < 1 or hi_i < lo_i:
        raise argparse.ArgumentTypeError(f"invalid range {text!r}")
    return range(lo_i, hi_i + 1)


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=_rational, help="balance threshold, e.g. 1/16")
    p.add_argument("--t", type=int, help="recursion budget (balanced splits before brute force)")
    p.add_argument("--cutoff", type=int, help="pair count at or below which leaves brute-force")
    p.add_argument(
        "--practical",
        action="store_true",
        help="desk-scale preset (epsilon 1/16, deep recursion) instead of the asymptotic defaults",
    )
    p.add_argument("--engine", choices=("auto", "compiled", "reference"), default="auto")


def _params_for(args):
    """Callable building solver params for an instance, or None for the defaults."""
    if not (args.practical or args.epsilon is not None or args.t is not None or args.cutoff is not None):
        return None

    def build(instance, domains) -> SolverParams:
        N = max(side_sizes(instance, domains))
        if args.practical:
            base = practical_params(N)
        else:
            c = instance.ratio if instance.num_constraints else Fraction(4)
            base = default_params(c, N)
        return SolverParams(
            epsilon=args.epsilon if args.epsilon is not None else base.epsilon,
            t_initial=args.t if args.t is not None else base.t_initial,
            brute_pair_cutoff=args.cutoff if args.cutoff is not None else base.brute_pair_cutoff,
        )

    return build


def _load(path):
    try:
        return read_instance(path)
    except OSError as exc:
        raise _Exit(EXIT_INVALID, f"cannot read {path}: {exc.strerror}") from None
    except (InstanceFormatError, ContractError) as exc:
        raise _Exit(EXIT_INVALID, f"{path}: {exc}") from None


def cmd_solve(args) -> int:
    instance, domains = _load(args.file)
    build = _params_for(args)
    try:
        params = build(instance, domains) if build else None
    except ContractError as exc:
        raise _Exit(EXIT_INVALID, str(exc)) from None
    report: dict = {}
    try:
        if args.objective is not None:
            if len(args.objective) != instance.num_vars:
                raise _Exit(
                    EXIT_INVALID,
                    f"--objective has {len(args.objective)} weights, instance has {instance.num_vars} variables",
                )
            best, stats = optimize(
                instance, domains, args.objective, args.strategy, params, engine=args.engine
            )
            report["feasible"] = best is not None
            if best is not None:
                report["assignment"] = list(best.assignment)
                report["objective_value"] = best.value
        else:
            verdict, stats = solve_feasibility(instance, domains, args.strategy, params, engine=args.engine)
            report["feasible"] = verdict.feasible
            if verdict.feasible:
                report["assignment"] = list(verdict.assignment)
    except (CapacityError, OverflowRiskError) as exc:
        raise _Exit(EXIT_CAPACITY, str(exc)) from None
    except ContractError as exc:
        raise _Exit(EXIT_INVALID, str(exc)) from None
    if args.stats:
        report["stats"] = dict(stats.counters(), elapsed_millis=round(stats.elapsed * 1000, 3))
    print(json.dumps(report))
    return EXIT_FEASIBLE if report["feasible"] else EXIT_INFEASIBLE


def cmd_generate(args) -> int:
    try:
        spec = GenSpec(
            num_vars=args.vars,
            num_constraints=args.constraints,
            seed=args.seed,
            coeff_min=args.coeff_min,
            coeff_max=args.coeff_max,
            mode="planted" if args.planted else "uniform",
            domain=tuple(args.domain) if args.domain else None,
        )
        instance, domains = generate(spec)
    except ContractError as exc:
        raise _Exit(EXIT_INVALID, str(exc)) from None
    data = serialize(instance, domains)
    try:
        with open(args.out, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise _Exit(EXIT_INVALID, f"cannot write {args.out}: {exc.strerror}") from None
    return 0


def cmd_check(args) -> int:
    instance, domains = _load(args.file)
    try:
        validate_no_overflow(instance, domains)
    except OverflowRiskError as exc:
        raise _Exit(EXIT_INVALID, str(exc)) from None
    print(json.dumps({"ok": True, "num_vars": instance.num_vars, "num_constraints": instance.num_constraints}))
    return 0


def cmd_bench(args) -> int:
    if args.trials < 1:
        raise _Exit(EXIT_INVALID, "--trials must be at least 1")
    if args.ratio <= 0:
        raise _Exit(EXIT_INVALID, "--ratio must be positive")
    strategies = [s for s in args.strategies.split(",") if s]
    if not strategies or any(s not in ("brute", "mitm") for s in strategies):
        raise _Exit(EXIT_INVALID, f"--strategies must list brute and/or mitm, got {args.strategies!r}")
    build = _params_for(args)
    rows = run_bench(
        args.vars,
        args.ratio,
        args.trials,
        args.seed,
        mode=args.mode,
        strategies=strategies,
        params_for=build,
        brute_max_vars=args.brute_max_vars,
        engine=args.engine,
    )
    try:
        count = write_csv(args.csv, rows)
    except OSError as exc:
        raise _Exit(EXIT_INVALID, f"cannot write {args.csv}: {exc.strerror}") from None
    except ContractError as exc:
        raise _Exit(EXIT_INVALID, str(exc)) from None
    except (CapacityError, OverflowRiskError) as exc:
        raise _Exit(EXIT_CAPACITY, str(exc)) from None
    except VerdictMismatch as exc:
        raise _Exit(EXIT_INFEASIBLE, f"internal error: {exc}") from None
    log.info("wrote %d rows to %s", count, args.csv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="domilp", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="decide feasibility (or maximize an objective)")
    p.add_argument("file")
    p.add_argument("--strategy", choices=("auto", "mitm", "brute"), default="auto")
    p.add_argument("--stats", action="store_true", help="include recursion counters in the report")
    p.add_argument("--objective", type=_int_list, help="maximize w.x for comma-separated weights")
    _add_param_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("generate", help="write a seeded random instance")
    p.add_argument("--vars", type=int, required=True)
    p.add_argument("--constraints", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--coeff-min", type=int, default=-8)
    p.add_argument("--coeff-max", type=int, default=8)
    p.add_argument("--planted", action="store_true", help="plant a feasible assignment")
    p.add_argument("--domain", type=_int_list, help="shared domain for every variable, e.g. 0,1,2")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("check", help="parse and validate an instance file")
    p.add_argument("file")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench", help="benchmark strategies on generated instances")
    p.add_argument("--vars", type=_range, required=True, help="LO..HI")
    p.add_argument("--ratio", type=_rational, required=True, help="constraints per variable")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mode", choices=("uniform", "planted"), default="uniform")
    p.add_argument("--csv", required=True)
    p.add_argument("--strategies", default="brute,mitm")
    p.add_argument("--brute-max-vars", type=int, default=28)
    _add_param_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except _Exit as exc:
        print(f"domilp: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
