"""Shape inference: Hindley-Milner over the unrefined types.

Refinement checking needs to know the shape of every lambda binder, case
scrutinee and equality operand, and how each polymorphic name is
instantiated.  This pass works those out and writes them onto the nodes.
Type variables of a declared signature are rigid; each use of a
polymorphic global gets fresh unknowns.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Mapping

from .core import (BOOL, INT, UNIT, Alt, App, Base, BoolLit, Case, Const, Ctor, DataDecl,
                   Definition, Expr, Fix, Fun, IntLit, Lam, MeasureDef, Program, RefType,
                   Shape, Span, TArrow, TData, TVar, UnitLit, Var, erase, generated_measures,
                   shape_tvars, subst_shape, type_tvars)

DEFAULT_TVAR = "_"


class ShapeError(Exception):
    kind = "ShapeError"

    def __init__(self, message: str, span: Span | None = None) -> None:
        super().__init__(message)
        self.span = span


class UnboundVariable(ShapeError):
    kind = "UnboundVariable"


def _is_meta(s: Shape) -> bool:
    return isinstance(s, TVar) and s.name.startswith("?")


_OPS = {
    "+": TArrow(INT, TArrow(INT, INT)),
    "-": TArrow(INT, TArrow(INT, INT)),
    "*": TArrow(INT, TArrow(INT, INT)),
    "<": TArrow(INT, TArrow(INT, BOOL)),
    "<=": TArrow(INT, TArrow(INT, BOOL)),
    "&&": TArrow(BOOL, TArrow(BOOL, BOOL)),
    "||": TArrow(BOOL, TArrow(BOOL, BOOL)),
    "not": TArrow(BOOL, BOOL),
}


class Inference:
    def __init__(self, datas: Mapping[str, DataDecl], schemes: Mapping[str, Shape]) -> None:
        self.datas = datas
        self.schemes = schemes
        self.ctors = {c.name: (d, c) for d in datas.values() for c in d.ctors}
        self.sol: dict[str, Shape] = {}
        self.k = 0
        self.in_program = False

    def meta(self) -> Shape:
        self.k += 1
        return TVar(f"?{self.k}")

    # unification ---------------------------------------------------------

    def walk(self, s: Shape) -> Shape:
        while _is_meta(s) and s.name in self.sol:
            s = self.sol[s.name]
        return s

    def zonk(self, s: Shape) -> Shape:
        s = self.walk(s)
        match s:
            case TArrow(d, c):
                return TArrow(self.zonk(d), self.zonk(c))
            case TData(n, args):
                return TData(n, tuple(self.zonk(a) for a in args))
        if _is_meta(s):
            return TVar(DEFAULT_TVAR)
        return s

    def occurs(self, name: str, s: Shape) -> bool:
        s = self.walk(s)
        if _is_meta(s):
            return s.name == name
        return any(self.occurs(name, TVar(n)) if n.startswith("?") else False
                   for n in shape_tvars(s))

    def unify(self, a: Shape, b: Shape, span: Span | None) -> None:
        a, b = self.walk(a), self.walk(b)
        if a == b:
            return
        if _is_meta(a):
            if self.occurs(a.name, b):
                raise ShapeError(f"infinite shape {self.zonk(a)} ~ {self.zonk(b)}", span)
            self.sol[a.name] = b
            return
        if _is_meta(b):
            self.unify(b, a, span)
            return
        match a, b:
            case TArrow(d1, c1), TArrow(d2, c2):
                self.unify(d1, d2, span)
                self.unify(c1, c2, span)
                return
            case TData(n1, as1), TData(n2, as2) if n1 == n2 and len(as1) == len(as2):
                for x, y in zip(as1, as2):
                    self.unify(x, y, span)
                return
        raise ShapeError(f"expected {self.zonk(b)} but found {self.zonk(a)}", span)

    # expressions -----------------------------------------------------------

    def instantiate(self, scheme: Shape) -> tuple[Shape, tuple[tuple[str, Shape], ...]]:
        names = list(dict.fromkeys(shape_tvars(scheme)))
        sub = {n: self.meta() for n in names}
        return subst_shape(scheme, sub), tuple(sub.items())

    def infer(self, e: Expr, env: Mapping[str, Shape]) -> tuple[Expr, Shape]:
        match e:
            case IntLit():
                return e, INT
            case BoolLit():
                return e, BOOL
            case UnitLit():
                return e, UNIT
            case Var(n):
                if n in env:
                    return e, env[n]
                if n in self.schemes:
                    s, inst = self.instantiate(self.schemes[n])
                    return replace(e, inst=inst), s
                raise UnboundVariable(f"unbound variable {n}", e.span)
            case Const(op):
                if op == "=":
                    m = self.meta()
                    return replace(e, ann=m), TArrow(m, TArrow(m, BOOL))
                return e, _OPS[op]
            case Lam(x, body, ann):
                dom = ann if ann is not None else self.meta()
                b, cod = self.infer(body, {**env, x: dom})
                return Lam(x, b, dom, e.span), TArrow(dom, cod)
            case App(f, a):
                f2, fs = self.infer(f, env)
                a2, as_ = self.infer(a, env)
                d, r = self.meta(), self.meta()
                self.unify(fs, TArrow(d, r), f.span or e.span)
                self.unify(as_, d, a.span or e.span)
                return App(f2, a2, e.span), r
            case Ctor(n, args):
                d, c = self.ctors[n]
                sub = {p: self.meta() for p in d.tparams}
                out = []
                for a, f in zip(args, c.fields):
                    a2, s = self.infer(a, env)
                    self.unify(s, subst_shape(f, sub), a.span or e.span)
                    out.append(a2)
                return (Ctor(n, tuple(out), tuple(sub.items()), e.span),
                        subst_shape(d.shape(), sub))
            case Case(x, scrut, alts):
                s2, ss = self.infer(scrut, env)
                res = self.meta()
                new_alts = []
                if {a.ctor for a in alts} <= {"True", "False"}:
                    self.unify(ss, BOOL, scrut.span or e.span)
                    for a in alts:
                        b, bs = self.infer(a.body, {**env, x: BOOL})
                        self.unify(bs, res, a.body.span or e.span)
                        new_alts.append(Alt(a.ctor, a.binders, b))
                    return Case(x, s2, tuple(new_alts), BOOL, e.span), res
                d, _ = self.ctors[alts[0].ctor]
                sub = {p: self.meta() for p in d.tparams}
                scrut_shape = subst_shape(d.shape(), sub)
                self.unify(ss, scrut_shape, scrut.span or e.span)
                for a in alts:
                    _, c = self.ctors[a.ctor]
                    inner = {**env, x: scrut_shape}
                    for y, f in zip(a.binders, c.fields):
                        inner[y] = subst_shape(f, sub)
                    b, bs = self.infer(a.body, inner)
                    self.unify(bs, res, a.body.span or e.span)
                    new_alts.append(Alt(a.ctor, a.binders, b))
                return Case(x, s2, tuple(new_alts), scrut_shape, e.span), res
            case Fix(f, body):
                m = self.meta()
                b, bs = self.infer(body, {**env, f: m})
                self.unify(bs, m, e.span)
                return Fix(f, b, e.span), m
        raise ShapeError(f"cannot infer a shape for {type(e).__name__}", e.span)

    def finish(self, e: Expr) -> Expr:
        """Replace solved unknowns; reject function equality in programs."""
        z = self.zonk

        def inst(pairs):
            return tuple((a, z(s)) for a, s in pairs)

        def go(e: Expr) -> Expr:
            match e:
                case Var(_, i) if i:
                    return replace(e, inst=inst(i))
                case Const(op, ann) if ann is not None:
                    s = z(ann)
                    if self.in_program and isinstance(s, TArrow):
                        raise ShapeError("= cannot compare functions in a program", e.span)
                    return replace(e, ann=s)
                case Lam(x, b, ann):
                    return Lam(x, go(b), z(ann), e.span)
                case App(f, a):
                    return App(go(f), go(a), e.span)
                case Ctor(n, args, i):
                    return Ctor(n, tuple(map(go, args)), inst(i), e.span)
                case Case(x, s, alts, ann):
                    return Case(x, go(s), tuple(Alt(a.ctor, a.binders, go(a.body))
                                                for a in alts), z(ann), e.span)
                case Fix(f, b):
                    return Fix(f, go(b), e.span)
            return e

        return go(e)

    # types -----------------------------------------------------------------

    def check_type(self, t: RefType, env: Mapping[str, Shape]) -> RefType:
        """Annotate the refinements inside ``t``; each must be boolean."""
        if isinstance(t, Fun):
            dom = self.check_type(t.dom, env)
            return Fun(t.param, dom, self.check_type(t.cod, {**env, t.param: erase(t.dom)}))
        self.check_shape(t.base, None)
        if t.refinement == BoolLit(True):
            return t
        r, s = self.infer(t.refinement, {**env, t.var: t.base})
        self.unify(s, BOOL, t.refinement.span)
        return replace(t, refinement=self.finish(r))

    def check_shape(self, s: Shape, span) -> None:
        if isinstance(s, TData):
            d = self.datas.get(s.name)
            if d is None or len(d.tparams) != len(s.args):
                raise ShapeError(f"bad data type {s}", span)


def schemes_of(p: Program) -> dict[str, Shape]:
    out: dict[str, Shape] = {}
    for d in p.datas:
        for name, scheme, _ in generated_measures(d):
            out[name] = scheme
    for m in p.measures:
        out[m.name] = erase(m.type)
    for d in p.defs:
        out[d.name] = erase(d.type)
    return out


def annotate_program(p: Program) -> Program:
    """The same program with every node's shape information filled in."""
    datas = {d.name: d for d in p.datas}
    schemes = schemes_of(p)
    measures = []
    for m in p.measures:
        inf = Inference(datas, schemes)
        ty = inf.check_type(m.type, {})
        dom = erase(m.type.dom)
        d = datas[dom.name]
        sub = dict(zip(d.tparams, dom.args))
        alts = []
        for a in m.alts:
            _, c = inf.ctors[a.ctor]
            env = {y: subst_shape(f, sub) for y, f in zip(a.binders, c.fields)}
            b, bs = inf.infer(a.body, env)
            inf.unify(bs, erase(m.type.cod), m.span)
            alts.append(Alt(a.ctor, a.binders, inf.finish(b)))
        measures.append(MeasureDef(m.name, ty, tuple(alts), m.span))
    defs = []
    for d in p.defs:
        defs.append(annotate_definition(d, datas, schemes))
    return Program(list(p.datas), measures, defs)


def annotate_definition(d: Definition, datas, schemes) -> Definition:
    inf = Inference(datas, schemes)
    ty = inf.check_type(d.type, {})
    body = d.body
    if body is not None:
        inf.in_program = True
        b, s = inf.infer(body, {})
        inf.unify(s, erase(d.type), d.span)
        body = inf.finish(b)
        inf.in_program = False
    metric = d.metric
    if metric is not None:
        env = {}
        t = d.type
        while isinstance(t, Fun):
            env[t.param] = erase(t.dom)
            t = t.cod
        out = []
        for m in metric:
            e, s = inf.infer(m, env)
            inf.unify(s, INT, m.span or d.span)
            out.append(inf.finish(e))
        metric = tuple(out)
    return replace(d, type=ty, body=body, metric=metric)


def annotate_expr(e: Expr, env: Mapping[str, Shape], p: Program,
                  expected: Shape | None = None) -> tuple[Expr, Shape]:
    """Infer a standalone expression (used by tests and the evaluator)."""
    inf = Inference({d.name: d for d in p.datas}, schemes_of(p))
    e2, s = inf.infer(e, env)
    if expected is not None:
        inf.unify(s, expected, e.span)
    return inf.finish(e2), inf.zonk(s)
