"""Abstract syntax of the source language and its refinement types.

Expressions are immutable.  Source spans and inferred annotations ride
along on the nodes: spans never take part in equality, annotations do
(two lambdas over different binder shapes translate differently).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

BUILTINS = ("=", "<", "<=", "&&", "||", "not", "+", "-", "*")
ARITY = {op: (1 if op == "not" else 2) for op in BUILTINS}


@dataclass(frozen=True)
class Span:
    start: int
    end: int

    def __str__(self) -> str:
        return f"{self.start}-{self.end}"


# -- shapes (unrefined types) ------------------------------------------------


class Shape:
    pass


@dataclass(frozen=True)
class TInt(Shape):
    def __str__(self) -> str:
        return "Int"


@dataclass(frozen=True)
class TBool(Shape):
    def __str__(self) -> str:
        return "Bool"


@dataclass(frozen=True)
class TUnit(Shape):
    def __str__(self) -> str:
        return "Unit"


@dataclass(frozen=True)
class TData(Shape):
    name: str
    args: tuple[Shape, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return "(" + " ".join([self.name, *map(str, self.args)]) + ")"


@dataclass(frozen=True)
class TVar(Shape):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TArrow(Shape):
    dom: Shape
    cod: Shape

    def __str__(self) -> str:
        return f"({self.dom} -> {self.cod})"


INT, BOOL, UNIT = TInt(), TBool(), TUnit()


def shape_tvars(s: Shape) -> Iterator[str]:
    match s:
        case TVar(n):
            yield n
        case TData(_, args):
            for a in args:
                yield from shape_tvars(a)
        case TArrow(d, c):
            yield from shape_tvars(d)
            yield from shape_tvars(c)


def subst_shape(s: Shape, sub: dict[str, Shape]) -> Shape:
    match s:
        case TVar(n):
            return sub.get(n, s)
        case TData(n, args):
            return TData(n, tuple(subst_shape(a, sub) for a in args))
        case TArrow(d, c):
            return TArrow(subst_shape(d, sub), subst_shape(c, sub))
    return s


# -- expressions -------------------------------------------------------------


class Expr:
    span: Span | None


@dataclass(frozen=True)
class IntLit(Expr):
    value: int
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class UnitLit(Expr):
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var(Expr):
    name: str
    # instantiation of the referenced binder's type variables, if polymorphic
    inst: tuple[tuple[str, Shape], ...] = ()
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Const(Expr):
    op: str
    # operand shape for the polymorphic equality
    ann: Shape | None = None
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Lam(Expr):
    param: str
    body: Expr
    ann: Shape | None = None
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class App(Expr):
    fn: Expr
    arg: Expr
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Ctor(Expr):
    name: str
    args: tuple[Expr, ...]
    inst: tuple[tuple[str, Shape], ...] = ()
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Alt:
    ctor: str
    binders: tuple[str, ...]
    body: Expr


@dataclass(frozen=True)
class Case(Expr):
    binder: str
    scrut: Expr
    alts: tuple[Alt, ...]
    ann: Shape | None = None  # shape of the scrutinee
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Fix(Expr):
    name: str
    body: Expr
    span: Span | None = field(default=None, compare=False, repr=False)


TRUE, FALSE = BoolLit(True), BoolLit(False)


def apps(fn: Expr, *args: Expr) -> Expr:
    for a in args:
        fn = App(fn, a)
    return fn


def binop(op: str, l: Expr, r: Expr) -> Expr:
    return App(App(Const(op), l), r)


def unwind(e: Expr) -> tuple[Expr, list[Expr]]:
    """Split an application spine into its head and arguments."""
    args: list[Expr] = []
    while isinstance(e, App):
        args.append(e.arg)
        e = e.fn
    return e, args[::-1]


def conj(parts: Iterable[Expr]) -> Expr:
    out: Expr | None = None
    for p in parts:
        if p == TRUE:
            continue
        out = p if out is None else binop("&&", out, p)
    return TRUE if out is None else out


def if_then_else(c: Expr, t: Expr, e: Expr, binder: str = "_b") -> Expr:
    return Case(binder, c, (Alt("True", (), t), Alt("False", (), e)))


# -- refinement types --------------------------------------------------------


class RefType:
    pass


@dataclass(frozen=True)
class Base(RefType):
    var: str
    base: Shape
    refinement: Expr = TRUE
    down: bool = True  # the terminating label

    def __str__(self) -> str:
        if self.refinement == TRUE:
            return str(self.base)
        return f"{{{self.var}:{self.base} | {show(self.refinement)}}}"


@dataclass(frozen=True)
class Fun(RefType):
    param: str
    dom: RefType
    cod: RefType

    def __str__(self) -> str:
        return f"{self.param}:{self.dom} -> {self.cod}"


def erase(t: RefType) -> Shape:
    if isinstance(t, Base):
        return t.base
    return TArrow(erase(t.dom), erase(t.cod))


def trivial(s: Shape, var: str = "v") -> RefType:
    """The unrefined type of a given shape."""
    if isinstance(s, TArrow):
        return Fun("_", trivial(s.dom), trivial(s.cod))
    return Base(var, s)


def params(t: RefType) -> list[tuple[str, RefType]]:
    out = []
    while isinstance(t, Fun):
        out.append((t.param, t.dom))
        t = t.cod
    return out


def result(t: RefType) -> RefType:
    while isinstance(t, Fun):
        t = t.cod
    return t


def type_tvars(t: RefType) -> list[str]:
    seen: dict[str, None] = {}
    for s in _type_shapes(t):
        for n in shape_tvars(s):
            seen[n] = None
    return list(seen)


def _type_shapes(t: RefType) -> Iterator[Shape]:
    if isinstance(t, Base):
        yield t.base
    else:
        yield from _type_shapes(t.dom)
        yield from _type_shapes(t.cod)


# -- programs ----------------------------------------------------------------


@dataclass(frozen=True)
class CtorDecl:
    name: str
    fields: tuple[Shape, ...]


@dataclass(frozen=True)
class DataDecl:
    name: str
    tparams: tuple[str, ...]
    ctors: tuple[CtorDecl, ...]
    span: Span | None = field(default=None, compare=False)

    def shape(self) -> TData:
        return TData(self.name, tuple(TVar(a) for a in self.tparams))


@dataclass(frozen=True)
class MeasureDef:
    name: str
    type: RefType  # Fun(x, data, result)
    alts: tuple[Alt, ...]
    span: Span | None = field(default=None, compare=False)

    @property
    def data(self) -> str:
        return erase(self.type.dom).name


@dataclass(frozen=True)
class Definition:
    """A top-level binding: reflect, let, prop or an assumed signature."""

    kind: str
    name: str
    type: RefType
    body: Expr | None
    metric: tuple[Expr, ...] | None = None
    span: Span | None = field(default=None, compare=False)
    source: str = field(default="", compare=False)


@dataclass
class Program:
    datas: list[DataDecl] = field(default_factory=list)
    measures: list[MeasureDef] = field(default_factory=list)
    defs: list[Definition] = field(default_factory=list)

    @property
    def reflects(self) -> list[Definition]:
        return [d for d in self.defs if d.kind == "reflect"]

    @property
    def lets(self) -> list[Definition]:
        return [d for d in self.defs if d.kind == "let"]

    @property
    def props(self) -> list[Definition]:
        return [d for d in self.defs if d.kind == "prop"]

    def extend(self, other: Program) -> Program:
        return Program(self.datas + other.datas, self.measures + other.measures,
                       self.defs + other.defs)

    def runtime_defs(self) -> dict[str, Expr]:
        """Everything the evaluator can call: bodies, measures, checkers and selectors."""
        out: dict[str, Expr] = {}
        for d in self.datas:
            for name, _, body in generated_measures(d):
                out[name] = body
        for m in self.measures:
            out[m.name] = Lam("_m", Case("_m", Var("_m"), m.alts))
        for d in self.defs:
            if d.body is not None:
                out[d.name] = d.body
        return out


def generated_measures(d: DataDecl) -> list[tuple[str, Shape, Expr]]:
    """``is_C`` and ``sel_C_i`` for each constructor, as (name, scheme, body).

    A selector applied to another constructor has no alternative and is
    stuck when evaluated; the logic leaves it unspecified.
    """
    out = []
    for c in d.ctors:
        xs = tuple(f"_f{i + 1}" for i in range(len(c.fields)))
        alts = tuple(Alt(k.name, tuple(f"_f{i + 1}" for i in range(len(k.fields))),
                         BoolLit(k.name == c.name)) for k in d.ctors)
        out.append((f"is_{c.name}", TArrow(d.shape(), TBool()),
                    Lam("_m", Case("_m", Var("_m"), alts))))
        for i, f in enumerate(c.fields):
            alt = Alt(c.name, xs, Var(xs[i]))
            out.append((f"sel_{c.name}_{i + 1}", TArrow(d.shape(), f),
                        Lam("_m", Case("_m", Var("_m"), (alt,)))))
    return out


# -- binders -----------------------------------------------------------------


def free_vars(e: Expr) -> frozenset[str]:
    match e:
        case Var(n):
            return frozenset((n,))
        case Lam(x, b):
            return free_vars(b) - {x}
        case App(f, a):
            return free_vars(f) | free_vars(a)
        case Ctor(_, args):
            return frozenset().union(*map(free_vars, args))
        case Case(x, s, alts):
            out = free_vars(s)
            for alt in alts:
                out |= free_vars(alt.body) - {x, *alt.binders}
            return out
        case Fix(f, b):
            return free_vars(b) - {f}
    return frozenset()


def type_free_vars(t: RefType) -> frozenset[str]:
    if isinstance(t, Base):
        return free_vars(t.refinement) - {t.var}
    return type_free_vars(t.dom) | (type_free_vars(t.cod) - {t.param})


_PRIME = re.compile(r"^(.*?)(?:'\d+)?$")


def fresh(base: str, avoid: Iterable[str]) -> str:
    """A deterministic variant of ``base`` avoiding every name in ``avoid``."""
    avoid = set(avoid)
    stem = _PRIME.match(base).group(1) or "x"
    k = 1
    while f"{stem}'{k}" in avoid:
        k += 1
    return f"{stem}'{k}"


def substitute(e: Expr, x: str, v: Expr) -> Expr:
    """Capture-avoiding e[x := v]."""
    return subst_many(e, {x: v})


def subst_many(e: Expr, sub: dict[str, Expr]) -> Expr:
    if not sub:
        return e
    fv = frozenset().union(*(free_vars(v) for v in sub.values()))
    return _subst(e, sub, fv)


def _subst(e: Expr, sub: dict[str, Expr], fv: frozenset[str]) -> Expr:
    match e:
        case Var(n):
            return sub.get(n, e)
        case Lam(x, b, ann):
            (x2,), b2, sub2 = _under(sub, fv, (x,), b)
            if not sub2:
                return e
            return Lam(x2, _subst(b2, sub2, fv), ann, e.span)
        case App(f, a):
            return App(_subst(f, sub, fv), _subst(a, sub, fv), e.span)
        case Ctor(n, args, inst):
            return Ctor(n, tuple(_subst(a, sub, fv) for a in args), inst, e.span)
        case Case(x, s, alts):
            s2 = _subst(s, sub, fv)
            sub_x = {k: v for k, v in sub.items() if k != x}
            if x in fv and any(set(sub_x) & free_vars(a.body) for a in alts):
                avoid = set(fv) | set(sub) | {x}
                for a in alts:
                    avoid |= free_vars(a.body) | set(a.binders)
                nx = fresh(x, avoid)
                alts = tuple(a if x in a.binders else
                             Alt(a.ctor, a.binders, _subst(a.body, {x: Var(nx)}, frozenset((nx,))))
                             for a in alts)
                x = nx
            out = []
            for a in alts:
                names, body, sub2 = _under(sub_x, fv, a.binders, a.body)
                out.append(Alt(a.ctor, names, _subst(body, sub2, fv) if sub2 else body))
            return Case(x, s2, tuple(out), e.ann, e.span)
        case Fix(f, b):
            (f2,), b2, sub2 = _under(sub, fv, (f,), b)
            if not sub2:
                return e
            return Fix(f2, _subst(b2, sub2, fv), e.span)
    return e


def _under(sub, fv, binders, body):
    """Enter a scope binding ``binders``; rename any that would capture."""
    sub2 = {k: v for k, v in sub.items() if k not in binders}
    live = {k for k in sub2 if k in free_vars(body)}
    sub2 = {k: sub2[k] for k in live}
    if not sub2:
        return tuple(binders), body, sub2
    names = []
    avoid = set(fv) | free_vars(body) | set(sub2) | set(binders)
    for b in binders:
        if b in fv:
            nb = fresh(b, avoid)
            avoid.add(nb)
            body = _subst(body, {b: Var(nb)}, frozenset((nb,)))
            names.append(nb)
        else:
            names.append(b)
    return tuple(names), body, sub2


def alpha_eq(a: Expr, b: Expr) -> bool:
    return _aeq(a, b, {}, {})


def _aeq(a: Expr, b: Expr, ma: dict, mb: dict) -> bool:
    match a, b:
        case Var(x, ia), Var(y, ib):
            if x in ma or y in mb:
                return ma.get(x) == mb.get(y) and ma.get(x) is not None
            return x == y and ia == ib
        case Lam(x, ba, aa), Lam(y, bb, ab):
            k = object()
            return aa == ab and _aeq(ba, bb, {**ma, x: k}, {**mb, y: k})
        case App(f1, a1), App(f2, a2):
            return _aeq(f1, f2, ma, mb) and _aeq(a1, a2, ma, mb)
        case Ctor(n1, as1, i1), Ctor(n2, as2, i2):
            return (n1 == n2 and i1 == i2 and len(as1) == len(as2)
                    and all(_aeq(p, q, ma, mb) for p, q in zip(as1, as2)))
        case Case(x, s1, alts1), Case(y, s2, alts2):
            if not _aeq(s1, s2, ma, mb) or len(alts1) != len(alts2):
                return False
            for p, q in zip(alts1, alts2):
                if p.ctor != q.ctor or len(p.binders) != len(q.binders):
                    return False
                ka = dict(ma)
                kb = dict(mb)
                for u, w in zip((x, *p.binders), (y, *q.binders)):
                    k = object()
                    ka[u] = k
                    kb[w] = k
                if not _aeq(p.body, q.body, ka, kb):
                    return False
            return True
        case Fix(f, b1), Fix(g, b2):
            k = object()
            return _aeq(b1, b2, {**ma, f: k}, {**mb, g: k})
    return a == b


# -- type variables inside expressions and types -----------------------------


def subst_tvars(e: Expr, sub: dict[str, Shape]) -> Expr:
    """Apply a type-variable substitution to the annotations of ``e``."""
    if not sub:
        return e

    def inst(pairs):
        return tuple((a, subst_shape(s, sub)) for a, s in pairs)

    def go(e: Expr) -> Expr:
        match e:
            case Var(n, i):
                return replace(e, inst=inst(i)) if i else e
            case Const(op, ann) if ann is not None:
                return replace(e, ann=subst_shape(ann, sub))
            case Lam(x, b, ann):
                return Lam(x, go(b), None if ann is None else subst_shape(ann, sub), e.span)
            case App(f, a):
                return App(go(f), go(a), e.span)
            case Ctor(n, args, i):
                return Ctor(n, tuple(map(go, args)), inst(i), e.span)
            case Case(x, s, alts, ann):
                return Case(x, go(s), tuple(Alt(a.ctor, a.binders, go(a.body)) for a in alts),
                            None if ann is None else subst_shape(ann, sub), e.span)
            case Fix(f, b):
                return Fix(f, go(b), e.span)
        return e

    return go(e)


def subst_type_tvars(t: RefType, sub: dict[str, Shape]) -> RefType:
    if not sub:
        return t
    if isinstance(t, Base):
        return Base(t.var, subst_shape(t.base, sub), subst_tvars(t.refinement, sub), t.down)
    return Fun(t.param, subst_type_tvars(t.dom, sub), subst_type_tvars(t.cod, sub))


def subst_type(t: RefType, x: str, v: Expr) -> RefType:
    """Capture-avoiding dependent substitution of a value into a type."""
    if isinstance(t, Base):
        if t.var == x:
            return t
        if t.var in free_vars(v):
            nv = fresh(t.var, free_vars(v) | free_vars(t.refinement))
            r = substitute(t.refinement, t.var, Var(nv))
            return Base(nv, t.base, substitute(r, x, v), t.down)
        return Base(t.var, t.base, substitute(t.refinement, x, v), t.down)
    dom = subst_type(t.dom, x, v)
    if t.param == x:
        return Fun(t.param, dom, t.cod)
    if t.param in free_vars(v):
        np = fresh(t.param, free_vars(v) | type_free_vars(t.cod) | {x})
        cod = subst_type(t.cod, t.param, Var(np))
        return Fun(np, dom, subst_type(cod, x, v))
    return Fun(t.param, dom, subst_type(t.cod, x, v))


def rename_param(t: Fun, y: str) -> RefType:
    """The codomain of ``t`` with its binder renamed to ``y``."""
    if t.param == y:
        return t.cod
    return subst_type(t.cod, t.param, Var(y))


def with_refinement(t: Base, extra: Expr) -> Base:
    return replace(t, refinement=conj((t.refinement, extra)))


# -- A-normalisation ---------------------------------------------------------


def anf_normalize(e: Expr, prefix: str = "t") -> Expr:
    """Name every intermediate application result.

    Bindings become immediately applied lambdas, so the result is again an
    ordinary expression.  Names are ``t0, t1, ...`` in evaluation order and
    never capture a name already free in ``e``.
    """
    used = set(free_vars(e)) | _all_binders(e)
    counter = iter(range(10**9))

    def new() -> str:
        while True:
            n = f"{prefix}{next(counter)}"
            if n not in used:
                used.add(n)
                return n

    def atom(e: Expr, binds: list) -> Expr:
        e = norm(e, binds)
        if isinstance(e, (Var, IntLit, BoolLit, UnitLit, Const, Lam)):
            return e
        t = new()
        binds.append((t, e))
        return Var(t)

    def norm(e: Expr, binds: list) -> Expr:
        match e:
            case App():
                head, args = unwind(e)
                head = head if isinstance(head, (Var, Const)) else atom(head, binds)
                return apps(head, *(atom(a, binds) for a in args))
            case Ctor(n, args, inst):
                return Ctor(n, tuple(atom(a, binds) for a in args), inst, e.span)
            case Lam(x, b, ann):
                return Lam(x, block(b), ann, e.span)
            case Case(x, s, alts):
                s = atom(s, binds)
                return Case(x, s, tuple(Alt(a.ctor, a.binders, block(a.body)) for a in alts),
                            e.ann, e.span)
        return e

    def block(e: Expr) -> Expr:
        binds: list = []
        out = norm(e, binds)
        for name, rhs in reversed(binds):
            out = App(Lam(name, out), rhs)
        return out

    return block(e)


def _all_binders(e: Expr) -> set[str]:
    match e:
        case Lam(x, b):
            return {x} | _all_binders(b)
        case App(f, a):
            return _all_binders(f) | _all_binders(a)
        case Ctor(_, args):
            return set().union(*map(_all_binders, args)) if args else set()
        case Case(x, s, alts):
            out = {x} | _all_binders(s)
            for a in alts:
                out |= set(a.binders) | _all_binders(a.body)
            return out
        case Fix(f, b):
            return {f} | _all_binders(b)
    return set()


# -- printing ----------------------------------------------------------------

_INFIX = {"=": "=", "<": "<", "<=": "<=", "&&": "&&", "||": "||", "+": "+", "-": "-",
          "*": "*"}


def show(e: Expr) -> str:
    match e:
        case IntLit(n):
            return str(n)
        case BoolLit(b):
            return "True" if b else "False"
        case UnitLit():
            return "()"
        case Var(n):
            return n
        case Const(op):
            return f"({op})"
        case Lam(x, b):
            return f"(\\{x} -> {show(b)})"
        case App(App(Const(op), l), r) if op in _INFIX:
            return f"({show(l)} {op} {show(r)})"
        case App(f, a):
            return f"({show(f)} {show(a)})"
        case Ctor(n, args):
            return n if not args else "(" + " ".join([n, *map(show, args)]) + ")"
        case Case(x, s, alts):
            body = "; ".join(
                " ".join([a.ctor, *a.binders]) + " -> " + show(a.body) for a in alts)
            return f"(case {show(s)} of {body})"
        case Fix(f, b):
            return f"(fix {f}. {show(b)})"
    raise TypeError(e)
