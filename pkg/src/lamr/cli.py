"""Command line: ``lamr check FILE...`` and ``lamr eval FILE EXPR``."""
from __future__ import annotations

import argparse
import shutil
import sys

from .checker import Config
from .driver import RunConfig, parse_file, run
from .evaluator import DEFAULT_FUEL, FunctionEquality, OutOfFuel, Stuck, Value, evaluate
from .parser import ParseError, parse_expr
from .pretty import value as show_value
from .shapes import ShapeError


def _positive(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return n


def _solver(text: str) -> str:
    if text == "builtin":
        return text
    if text.startswith("external:"):
        exe = text.split(":", 1)[1]
        if not exe or shutil.which(exe) is None:
            raise argparse.ArgumentTypeError(f"no executable {exe!r}")
        return text
    raise argparse.ArgumentTypeError("expected builtin or external:<path>")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lamr", description="Check refinement-reflection proofs.")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--fuel", type=_positive, default=DEFAULT_FUEL,
                        help="evaluation step limit (default %(default)s)")

    chk = sub.add_parser("check", parents=[common], help="check files")
    chk.add_argument("files", nargs="+")
    chk.add_argument("--lambda-pool", type=_positive, default=Config.pool,
                     help="binders per sort available for lambdas (default %(default)s)")
    chk.add_argument("--instance-budget", type=_positive, default=Config.instance_budget,
                     help="alpha/beta instances per obligation (default %(default)s)")
    chk.add_argument("--branch-budget", type=_positive, default=Config.branch_budget,
                     help="solver conflicts per obligation (default %(default)s)")
    chk.add_argument("--solver", type=_solver, default="builtin",
                     help="builtin or external:<path> (default %(default)s)")
    chk.add_argument("--emit-smt", metavar="DIR", help="write each VC as SMT-LIB2 into DIR")
    chk.add_argument("-v", "--verbose", action="store_true", help="print every VC")

    ev = sub.add_parser("eval", parents=[common], help="evaluate an expression")
    ev.add_argument("file", help="definitions in scope")
    ev.add_argument("expr")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check":
        cfg = RunConfig(tuple(args.files), args.fuel, args.lambda_pool, args.instance_budget,
                        args.branch_budget, args.solver, args.emit_smt, args.verbose)
        status, text = run(cfg)
        if text:
            print(text)
        return status
    return _eval(args.file, args.expr, args.fuel)


def _eval(path: str, source: str, fuel: int) -> int:
    try:
        program = parse_file(open(path).read())
        e = parse_expr(source, program.datas)
    except OSError as err:
        print(f"ERROR {path} [IOError] {err.strerror}", file=sys.stderr)
        return 2
    except (ParseError, ShapeError) as err:
        print(f"ERROR [{err.kind}] {err}", file=sys.stderr)
        return 2
    try:
        r = evaluate(e, fuel, program.runtime_defs())
    except FunctionEquality as err:
        print(f"cannot compare functions: {err}")
        return 1
    if isinstance(r, Value):
        print(show_value(r.expr))
        return 0
    if isinstance(r, OutOfFuel):
        print(f"out of fuel after {fuel} steps")
    elif isinstance(r, Stuck):
        print(f"stuck: {r.reason}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
