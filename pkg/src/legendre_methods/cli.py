"""Command line entry point: ``legendre {run,compare,verify,list-problems,list-methods}``."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor

from . import acceptance, harness
from .errors import LegendreError
from .model import PROBLEM_NAMES, make_problem

CONFIG_FLAGS = (
    ("problem", str),
    ("k0", float),
    ("kfactor", float),
    ("kmax", float),
    ("k", float),
    ("steps", int),
    ("inner_tol", float),
    ("equiv_tol", float),
    ("tau", float),
    ("alpha", float),
    ("eta", float),
    ("beta", float),
    ("seed", int),
)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with RunConfig fields (flags override it)")
    for name, typ in CONFIG_FLAGS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--lambda0", type=float, nargs="+", default=None, help="initial multipliers (one value broadcasts)")


def _config(args, method: str, **extra) -> harness.RunConfig:
    overrides = {name: getattr(args, name) for name, _ in CONFIG_FLAGS}
    lam0 = args.lambda0
    overrides["lambda0"] = None if lam0 is None else (lam0[0] if len(lam0) == 1 else lam0)
    overrides.update(extra)
    overrides["method"] = method
    if args.config:
        return harness.RunConfig.from_file(args.config, **overrides)
    return harness.RunConfig.from_dict({k: v for k, v in overrides.items() if v is not None})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="legendre", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run one method and emit its trace")
    p.add_argument("method")
    _add_config_flags(p)
    p.add_argument("--output", "-o", help="trace file (relative paths use $%s)" % harness.OUTPUT_DIR_ENV)
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default=None)
    p.add_argument("--gap-data", action="store_true", help="emit (k, gap, bound) rows of a sumt:* run")

    p = sub.add_parser("compare", help="compare the multiplier sequences of two methods")
    p.add_argument("method_a")
    p.add_argument("method_b")
    _add_config_flags(p)
    p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("verify", help="run an acceptance suite; nonzero exit on failure")
    p.add_argument("suite", nargs="*", default=["all"], help="suite names: %s" % ", ".join(list(acceptance.SUITES)[:7]))
    p.add_argument("--jobs", "-j", type=int, default=1)

    sub.add_parser("list-problems", help="built-in problems")
    sub.add_parser("list-methods", help="registered methods")
    return parser


def _cmd_run(args) -> int:
    cfg = _config(args, args.method, output=args.output, fmt=args.fmt)
    trace = harness.gap_data(cfg) if args.gap_data else harness.run(cfg)
    text = harness.emit(trace, cfg.fmt, cfg.output)
    if cfg.output is None:
        sys.stdout.write(text)
    for e in trace.events:
        print(f"event: {e}", file=sys.stderr)
    return 0


def _cmd_compare(args) -> int:
    rep = harness.compare(_config(args, args.method_a), _config(args, args.method_b), tol=args.tol)
    for st in rep.steps:
        print(f"step {st.step}: {st.max_diff:.3e}")
    print(rep.summary())
    return 0 if rep.passed else 1


def _cmd_verify(args) -> int:
    numbers = []
    for name in args.suite:
        numbers.extend(n for n in acceptance.resolve_suite(name) if n not in numbers)
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(acceptance.run_criterion, numbers))
    else:
        results = [acceptance.run_criterion(n) for n in numbers]
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} criteria passed")
    return 1 if failed else 0


def _cmd_list_problems(args) -> int:
    for name in PROBLEM_NAMES:
        P = make_problem(name)
        note = f"  (also {name}(n,m,seed))" if name.startswith("random") else ""
        print(f"{name:20s} n={P.n} m={P.m} {'LP' if P.is_lp else 'QP'}{note}")
    return 0


def _cmd_list_methods(args) -> int:
    for name, (_, doc) in harness.METHODS.items():
        print(f"{name:20s} {doc}")
    return 0


COMMANDS = {
    "run": _cmd_run,
    "compare": _cmd_compare,
    "verify": _cmd_verify,
    "list-problems": _cmd_list_problems,
    "list-methods": _cmd_list_methods,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.verb](args)
    except (LegendreError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
