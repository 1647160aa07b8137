"""Sorts and predicates of the quantifier-free logic (QF-UFLIA)."""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterator, Mapping


class Sort:
    pass


@dataclass(frozen=True)
class SInt(Sort):
    def __str__(self) -> str:
        return "Int"


@dataclass(frozen=True)
class SBool(Sort):
    def __str__(self) -> str:
        return "Bool"


@dataclass(frozen=True)
class SUniv(Sort):
    def __str__(self) -> str:
        return "Univ"


@dataclass(frozen=True)
class SFun(Sort):
    arg: Sort
    res: Sort

    def __str__(self) -> str:
        # prefix notation with fixed arity reads back unambiguously
        return f"Fun_{self.arg}_{self.res}"


@dataclass(frozen=True)
class SArrow:
    """Signature of a first-order symbol; never the sort of a term."""

    args: tuple[Sort, ...]
    res: Sort

    def __str__(self) -> str:
        return "(" + " ".join(map(str, self.args)) + f") {self.res}"


S_INT, S_BOOL, S_UNIV = SInt(), SBool(), SUniv()


def fun_sorts(s: Sort) -> Iterator[SFun]:
    if isinstance(s, SFun):
        yield from fun_sorts(s.arg)
        yield from fun_sorts(s.res)
        yield s


class Pred:
    pass


_INTERNED: dict[tuple, "Pred"] = {}


def _node(cls):
    """A frozen dataclass whose instances are hash-consed.

    VC terms are large DAGs that get hashed and compared constantly; with
    one object per distinct term both become identity operations.
    """
    cls = dataclass(frozen=True, eq=False)(cls)
    names = [f.name for f in fields(cls)]
    init = cls.__init__

    def __new__(c, *args, **kw):
        key = (c, *args, *(kw[n] for n in names[len(args):]))
        node = _INTERNED.get(key)
        if node is None:
            node = object.__new__(c)
            init(node, *args, **kw)
            _INTERNED[key] = node
        return node

    cls.__new__ = __new__
    cls.__init__ = lambda self, *args, **kw: None
    cls.__hash__ = object.__hash__
    cls.__eq__ = lambda self, other: self is other
    cls.__reduce__ = lambda self: (cls, tuple(getattr(self, n) for n in names))
    return cls


@_node
class PInt(Pred):
    value: int


@_node
class PBool(Pred):
    value: bool


@_node
class PVar(Pred):
    name: str
    sort: Sort


@_node
class PApp(Pred):
    fn: str
    args: tuple[Pred, ...]
    sort: Sort


@_node
class PBin(Pred):
    op: str
    left: Pred
    right: Pred


@_node
class PNot(Pred):
    arg: Pred


@_node
class PIte(Pred):
    cond: Pred
    then: Pred
    other: Pred


PTRUE, PFALSE = PBool(True), PBool(False)

ARITH = ("+", "-", "*")
COMPARE = ("=", "<", "<=")
CONNECTIVE = ("&&", "||", "=>")


def sort_of(p: Pred) -> Sort:
    match p:
        case PInt():
            return S_INT
        case PBool() | PNot():
            return S_BOOL
        case PVar(_, s) | PApp(_, _, s):
            return s
        case PBin(op):
            return S_INT if op in ARITH else S_BOOL
        case PIte(_, t, _):
            return sort_of(t)
    raise TypeError(p)


def p_and(*ps: Pred) -> Pred:
    parts = [q for q in ps if q != PTRUE]
    if any(q == PFALSE for q in parts):
        return PFALSE
    if not parts:
        return PTRUE
    out = parts[0]
    for q in parts[1:]:
        out = PBin("&&", out, q)
    return out


def p_eq(a: Pred, b: Pred) -> Pred:
    return PBin("=", a, b)


def conjuncts(p: Pred) -> Iterator[Pred]:
    if isinstance(p, PBin) and p.op == "&&":
        yield from conjuncts(p.left)
        yield from conjuncts(p.right)
    elif p != PTRUE:
        yield p


def children(p: Pred) -> tuple[Pred, ...]:
    match p:
        case PApp(_, args):
            return args
        case PBin(_, l, r):
            return (l, r)
        case PNot(a):
            return (a,)
        case PIte(c, t, e):
            return (c, t, e)
    return ()


def subterms(p: Pred) -> Iterator[Pred]:
    seen: set[Pred] = set()
    stack = [p]
    while stack:
        q = stack.pop()
        if q in seen:
            continue
        seen.add(q)
        yield q
        stack.extend(children(q))


def pvars(p: Pred) -> set[PVar]:
    return {q for q in subterms(p) if isinstance(q, PVar)}


def psubst(p: Pred, sub: Mapping[Pred, Pred]) -> Pred:
    """Replace subterms (usually variables) everywhere, bottom-up memoised."""
    memo: dict[Pred, Pred] = {}

    def go(q: Pred) -> Pred:
        if q in sub:
            return sub[q]
        if q in memo:
            return memo[q]
        match q:
            case PApp(f, args, s):
                out = PApp(f, tuple(map(go, args)), s)
            case PBin(op, l, r):
                out = PBin(op, go(l), go(r))
            case PNot(a):
                out = PNot(go(a))
            case PIte(c, t, e):
                out = PIte(go(c), go(t), go(e))
            case _:
                out = q
        memo[q] = out
        return out

    return go(p)


def to_sexpr(p: Pred) -> str:
    match p:
        case PInt(n):
            return str(n) if n >= 0 else f"(- {-n})"
        case PBool(b):
            return "true" if b else "false"
        case PVar(n):
            return quote(n)
        case PApp(f, args):
            if not args:
                return quote(f)
            return "(" + " ".join([quote(f), *map(to_sexpr, args)]) + ")"
        case PBin(op, l, r):
            sym = {"&&": "and", "||": "or", "=>": "=>"}.get(op, op)
            return f"({sym} {to_sexpr(l)} {to_sexpr(r)})"
        case PNot(a):
            return f"(not {to_sexpr(a)})"
        case PIte(c, t, e):
            return f"(ite {to_sexpr(c)} {to_sexpr(t)} {to_sexpr(e)})"
    raise TypeError(p)


_SIMPLE = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.$@")
_RESERVED = {"and", "or", "not", "ite", "true", "false", "distinct", "let", "xor", "div", "mod",
             "abs", "forall", "exists", "par", "as", "assert", "check-sat"}


def quote(name: str) -> str:
    """An SMT-LIB symbol for ``name``; quoted when it has odd characters."""
    if (name and all(c in _SIMPLE for c in name) and not name[0].isdigit()
            and name not in _RESERVED):
        return name
    return "|" + name.replace("|", "!").replace("\\", "!") + "|"


def simplify(p: Pred) -> Pred:
    """Fold literal arithmetic, comparisons, connectives and conditionals."""
    memo: dict[Pred, Pred] = {}

    def go(q: Pred) -> Pred:
        if q in memo:
            return memo[q]
        match q:
            case PApp(f, args, s):
                out = PApp(f, tuple(map(go, args)), s) if args else q
            case PNot(a):
                a = go(a)
                out = PBool(not a.value) if isinstance(a, PBool) else PNot(a)
            case PIte(c, t, e):
                c = go(c)
                if isinstance(c, PBool):
                    out = go(t) if c.value else go(e)
                else:
                    t, e = go(t), go(e)
                    out = t if t == e else PIte(c, t, e)
            case PBin(op, l, r):
                out = _fold(op, go(l), go(r))
            case _:
                out = q
        memo[q] = out
        return out

    return go(p)


def _fold(op: str, l: Pred, r: Pred) -> Pred:
    lit = (PInt, PBool)
    if isinstance(l, lit) and isinstance(r, lit) and type(l) is type(r):
        a, b = l.value, r.value
        if op in ARITH and isinstance(l, PInt):
            return PInt(a + b if op == "+" else a - b if op == "-" else a * b)
        if op == "=":
            return PBool(a == b)
        if op in ("<", "<=") and isinstance(l, PInt):
            return PBool(a < b if op == "<" else a <= b)
    if op == "=" and l == r:
        return PTRUE
    if op == "&&":
        if l == PFALSE or r == PFALSE:
            return PFALSE
        if l == PTRUE:
            return r
        if r == PTRUE:
            return l
    if op == "||":
        if l == PTRUE or r == PTRUE:
            return PTRUE
        if l == PFALSE:
            return r
        if r == PFALSE:
            return l
    if op == "=>":
        if l == PFALSE or r == PTRUE:
            return PTRUE
        if l == PTRUE:
            return r
    return PBin(op, l, r)
