"""Small-step call-by-value reduction, left to right.

Used as the ground-truth semantics: the checker never calls it, the
test-suite compares it against the logic.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .core import (ARITY, Alt, App, BoolLit, Case, Const, Ctor, Expr, Fix, IntLit, Lam,
                   UnitLit, Var, show, substitute)

DEFAULT_FUEL = 100_000


class FunctionEquality(Exception):
    """Structural equality was asked to compare a function."""


class StuckError(Exception):
    pass


@dataclass(frozen=True)
class Value:
    expr: Expr


@dataclass(frozen=True)
class OutOfFuel:
    expr: Expr
    steps: int


@dataclass(frozen=True)
class Stuck:
    expr: Expr
    reason: str


def is_value(e: Expr) -> bool:
    match e:
        case IntLit() | BoolLit() | UnitLit() | Lam() | Const():
            return True
        case App(Const(op), a):
            return ARITY[op] == 2 and is_value(a)
        case Ctor(_, args):
            return all(map(is_value, args))
    return False


def step(e: Expr, defs: Mapping[str, Expr]) -> Expr:
    """One reduction step; raises StuckError on a value or a stuck term."""
    match e:
        case Var(n):
            if n in defs:
                return defs[n]
            raise StuckError(f"unbound variable {n}")
        case App(f, a):
            if not is_value(f):
                return App(step(f, defs), a)
            if not is_value(a):
                return App(f, step(a, defs))
            match f:
                case Lam(x, b):
                    return substitute(b, x, a)
                case Const(op) if ARITY[op] == 1:
                    return delta(op, a)
                case App(Const(op), l):
                    return delta(op, l, a)
                case Const():
                    raise StuckError("partial application is a value")
            raise StuckError(f"cannot apply {show(f)}")
        case Ctor(n, args, inst):
            for i, a in enumerate(args):
                if not is_value(a):
                    return Ctor(n, args[:i] + (step(a, defs),) + args[i + 1:], inst)
            raise StuckError("value")
        case Case(x, s, alts):
            if not is_value(s):
                return Case(x, step(s, defs), alts, e.ann)
            return select(x, s, alts)
        case Fix(f, b):
            return substitute(b, f, e)
    raise StuckError("value")


def select(x: str, s: Expr, alts: tuple[Alt, ...]) -> Expr:
    match s:
        case BoolLit(b):
            tag, fields = ("True" if b else "False"), ()
        case Ctor(tag, fields):
            pass
        case _:
            raise StuckError(f"case on {show(s)}")
    for alt in alts:
        if alt.ctor == tag:
            body = alt.body
            if x not in alt.binders:
                body = substitute(body, x, s)
            for y, v in zip(alt.binders, fields):
                body = substitute(body, y, v)
            return body
    raise StuckError(f"no alternative for {tag}")


def delta(op: str, *vs: Expr) -> Expr:
    match op, vs:
        case "not", (BoolLit(b),):
            return BoolLit(not b)
        case "=", (l, r):
            return BoolLit(structural_eq(l, r))
        case ("&&" | "||"), (BoolLit(a), BoolLit(b)):
            return BoolLit(a and b if op == "&&" else a or b)
        case ("<" | "<="), (IntLit(a), IntLit(b)):
            return BoolLit(a < b if op == "<" else a <= b)
        case ("+" | "-" | "*"), (IntLit(a), IntLit(b)):
            return IntLit(a + b if op == "+" else a - b if op == "-" else a * b)
    raise StuckError(f"bad operands for {op}")


def structural_eq(l: Expr, r: Expr) -> bool:
    match l, r:
        case (Lam() | Const() | App()), _:
            raise FunctionEquality(show(l))
        case _, (Lam() | Const() | App()):
            raise FunctionEquality(show(r))
        case Ctor(n, xs), Ctor(m, ys):
            return n == m and all(structural_eq(a, b) for a, b in zip(xs, ys))
    return l == r


def evaluate(e: Expr, fuel: int = DEFAULT_FUEL,
             defs: Mapping[str, Expr] | None = None) -> Value | OutOfFuel | Stuck:
    defs = defs or {}
    for k in range(fuel):
        if is_value(e):
            return Value(e)
        try:
            e = step(e, defs)
        except StuckError as err:
            return Stuck(e, str(err))
    if is_value(e):
        return Value(e)
    return OutOfFuel(e, fuel)
