"""Refinement type checking by verification-condition generation.

Checking is bidirectional.  ``synth`` returns the environment it extended
(argument temporaries stay in scope, so the facts they carry reach every
later obligation of the same expression), the synthesized type and the
expression rewritten over those temporaries.  ``check`` pushes a type into
lambdas, cases and let-bodies, and otherwise falls back to subtyping, whose
base case becomes one verification condition.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

from .core import (BOOL, INT, TRUE, UNIT, Alt, App, Base, BoolLit, Case, Const, Ctor, DataDecl,
                   Definition, Expr, Fix, Fun, IntLit, Lam, MeasureDef, Program, RefType,
                   Shape, Span, TArrow, TData, TVar, UnitLit, Var, conj, erase, fresh,
                   free_vars, params, rename_param, result, shape_tvars, show, subst_many,
                   subst_shape, subst_tvars, subst_type, subst_type_tvars, substitute,
                   trivial, type_free_vars, unwind, with_refinement)
from .logic import (INSTANCE_BUDGET, POOL_SIZE, VC, LogicEnv, NotTranslatable, PoolExhausted,
                    embed, embed_env, render_vc, strengthen, translate)
from .pred import PTRUE, Pred, PVar, p_and, simplify, to_sexpr
from .shapes import ShapeError, annotate_program
from .smt import BRANCH_BUDGET, Invalid, Unknown, Valid, solve


class CheckError(Exception):
    kind = "CheckError"

    def __init__(self, message: str, span: Span | None = None) -> None:
        super().__init__(message)
        self.span = span


class ShapeMismatch(CheckError):
    kind = "ShapeMismatch"


class ArityMismatch(CheckError):
    kind = "ArityMismatch"


class MeasureAltMissing(CheckError):
    kind = "MeasureAltMissing"


@dataclass(frozen=True)
class Config:
    pool: int = POOL_SIZE
    instance_budget: int = INSTANCE_BUDGET
    branch_budget: int = BRANCH_BUDGET
    solver: str = "builtin"


@dataclass
class Obligation:
    definition: str
    rule: str
    span: Span | None
    vc: VC | None
    message: str = ""
    status: str = "FAIL"  # PASS, FAIL or UNKNOWN
    verdict: object = None
    file: str = ""

    @property
    def goal(self) -> str:
        return to_sexpr(self.vc.goal) if self.vc is not None else ""

    @property
    def model(self) -> dict:
        return self.verdict.model if isinstance(self.verdict, Invalid) else {}

    def render_vc(self) -> str:
        return render_vc(self.vc) if self.vc is not None else ""


Diagnostic = Obligation
Env = tuple[tuple[str, RefType], ...]


def _eq(a: Expr, b: Expr, shape: Shape) -> Expr:
    return App(App(Const("=", shape), a), b)


def _op(op: str, a: Expr, b: Expr) -> Expr:
    return App(App(Const(op), a), b)


def _not(a: Expr) -> Expr:
    return App(Const("not"), a)


def _atomic(e: Expr) -> bool:
    return isinstance(e, (Var, IntLit, BoolLit, UnitLit))


# -- reflection and constructors ---------------------------------------------


def exact_type(t: RefType, e: Expr) -> RefType:
    """Strengthen ``t`` so its result is known to equal the body ``e``."""
    if isinstance(t, Fun):
        if not isinstance(e, Lam):
            raise ShapeMismatch("a reflected function must be written as a lambda of one "
                                "argument per declared parameter")
        body = e.body if e.param == t.param else substitute(e.body, e.param, Var(t.param))
        return Fun(t.param, t.dom, exact_type(t.cod, body))
    if t.var in free_vars(e):
        nv = fresh(t.var, free_vars(e) | free_vars(t.refinement))
        t = Base(nv, t.base, substitute(t.refinement, t.var, Var(nv)), t.down)
    return with_refinement(t, _eq(Var(t.var), e, t.base))


def refine_constructors(d: DataDecl, ms: Iterable[MeasureDef]) -> dict[str, RefType]:
    """Constructor signatures whose results record checkers, selectors and measures."""
    out = {}
    ms = [m for m in ms if m.data == d.name]
    ident = tuple((a, TVar(a)) for a in d.tparams)
    for c in d.ctors:
        xs = [f"x{i + 1}" for i in range(len(c.fields))]
        v = "v"
        parts: list[Expr] = []
        for other in d.ctors:
            test = App(Var(f"is_{other.name}"), Var(v))
            parts.append(test if other.name == c.name else _not(test))
        for i, (x, f) in enumerate(zip(xs, c.fields)):
            sel = App(Var(f"sel_{c.name}_{i + 1}", inst=ident), Var(v))
            parts.append(_eq(sel, Var(x), f))
        for m in ms:
            alt = next((a for a in m.alts if a.ctor == c.name), None)
            if alt is None:
                raise MeasureAltMissing(f"measure {m.name} has no equation for {c.name}",
                                        m.span)
            dom = erase(m.type.dom)
            msub = {a.name: TVar(p) for a, p in zip(dom.args, d.tparams) if isinstance(a, TVar)}
            body = subst_tvars(alt.body, msub)
            body = subst_many(body, {y: Var(x) for y, x in zip(alt.binders, xs)})
            res = subst_shape(erase(m.type.cod), msub)
            app = App(Var(m.name, inst=tuple((a, TVar(p)) for a, p in msub.items())), Var(v))
            parts.append(_eq(app, body, res))
        t: RefType = Base(v, d.shape(), conj(parts))
        for x, f in reversed(list(zip(xs, c.fields))):
            t = Fun(x, trivial(f), t)
        out[c.name] = t
    return out


_CONST_TYPES: dict[str, RefType] = {}


def const_type(op: str, ann: Shape | None) -> RefType:
    def bin_(dom: Shape, res: Shape) -> RefType:
        body = _op(op, Var("x"), Var("y")) if op != "=" else _eq(Var("x"), Var("y"), dom)
        return Fun("x", Base("v", dom), Fun("y", Base("v", dom),
                                            Base("v", res, _eq(Var("v"), body, res))))

    if op in ("+", "-", "*"):
        return bin_(INT, INT)
    if op in ("<", "<="):
        return bin_(INT, BOOL)
    if op in ("&&", "||"):
        return bin_(BOOL, BOOL)
    if op == "not":
        return Fun("x", Base("v", BOOL), Base("v", BOOL, _eq(Var("v"), _not(Var("x")), BOOL)))
    return bin_(ann if ann is not None else TVar("_"), BOOL)


# -- the checker -------------------------------------------------------------


@dataclass
class _Rec:
    """What the termination check needs to know about a function in scope."""

    params: list[str]
    metric: tuple[Expr, ...] | None
    note: str = ""  # set when the default metric was one choice among several


class Checker:
    def __init__(self, program: Program, config: Config = Config(),
                 trusted: Iterable[str] = ()) -> None:
        self.config = config
        self.trusted = frozenset(trusted)
        self.program = program
        self.logic = LogicEnv.for_program(program, config.pool)
        self.ctor_types: dict[str, RefType] = {}
        self.globals: dict[str, RefType] = {}
        self.kinds: dict[str, str] = {}
        self.results: list[Obligation] = []
        self.current = ""
        self.current_span: Span | None = None
        self.used: set[str] = set()
        self.rec: dict[str, _Rec] = {}
        self.caller: str | None = None
        self._cache: dict = {}

    # -- bookkeeping -------------------------------------------------------

    def fresh(self, base: str) -> str:
        n = fresh(base, self.used)
        self.used.add(n)
        return n

    def emit(self, rule: str, span, vc: VC | None, message: str = "") -> Obligation:
        ob = Obligation(self.current, rule, span or self.current_span, vc, message)
        self.results.append(ob)
        return ob

    def fail(self, rule: str, span, message: str) -> None:
        self.emit(rule, span, None, message)

    def tr(self, G: Env, e: Expr) -> Pred | None:
        try:
            return translate(e, self.rho(G), self.logic)
        except NotTranslatable:
            return None

    def rho(self, G: Env) -> dict[str, Pred]:
        return {x: PVar(x, embed(erase(t))) for x, t in G}

    def obligation(self, G: Env, goal: Expr, span, rule: str = "Sub-Base",
                   message: str = "") -> None:
        """Emit the VC ``embed(G) => goal``."""
        try:
            p = translate(goal, self.rho(G), self.logic)
        except PoolExhausted as err:
            self.fail("PoolExhausted", span, str(err))
            return
        except NotTranslatable as err:
            self.fail("NotTranslatable", span, f"{show(goal)}: {err}")
            return
        vc = VC(simplify(self.embed(G)), simplify(p))
        self.emit(rule, span, vc, message)

    def embed(self, G: Env) -> Pred:
        parts = []
        rho = self.rho(G)
        for x, t in G:
            if not isinstance(t, Base) or not t.down or t.refinement == TRUE:
                continue
            key = (x, t, rho.get(x))
            if key not in self._cache:
                r = t.refinement if t.var == x else substitute(t.refinement, t.var, Var(x))
                fv = free_vars(r)
                sub_rho = {k: v for k, v in rho.items() if k in fv}
                try:
                    self._cache[key] = translate(r, sub_rho, self.logic)
                except NotTranslatable:
                    self._cache[key] = PTRUE
            parts.append(self._cache[key])
        return p_and(*parts)

    def bind(self, G: Env, x: str, t: RefType) -> Env:
        return G + ((x, t),)

    # -- global types ------------------------------------------------------

    def global_type(self, e: Var) -> RefType:
        t = self.globals[e.name]
        return subst_type_tvars(t, dict(e.inst)) if e.inst else t

    def ctor_type(self, e: Ctor) -> RefType:
        t = self.ctor_types[e.name]
        return subst_type_tvars(t, dict(e.inst)) if e.inst else t

    # -- synthesis ---------------------------------------------------------

    def selfify(self, G: Env, t: RefType, e: Expr) -> RefType:
        if not isinstance(t, Base) or not t.down or isinstance(e, (IntLit, BoolLit)):
            return t
        if self.tr(G, e) is None:
            return t
        v = t.var
        if v in free_vars(e):
            v = self.fresh(v)
            t = Base(v, t.base, substitute(t.refinement, t.var, Var(v)), t.down)
        return with_refinement(t, _eq(Var(v), e, t.base))

    def lookup(self, G: Env, x: str) -> RefType | None:
        for y, t in reversed(G):
            if y == x:
                return t
        return None

    def synth(self, G: Env, e: Expr) -> tuple[Env, RefType, Expr]:
        match e:
            case IntLit():
                return G, Base("v", INT, _eq(Var("v"), e, INT)), e
            case BoolLit():
                return G, Base("v", BOOL, _eq(Var("v"), e, BOOL)), e
            case UnitLit():
                return G, Base("v", UNIT), e
            case Var(x):
                t = self.lookup(G, x)
                if t is not None:
                    if isinstance(t, Base):
                        return G, Base("v", t.base, _eq(Var("v"), e, t.base), t.down), e
                    return G, t, e
                if x in self.globals:
                    self.termination_call(G, e, [], e.span)
                    return G, self.selfify(G, self.global_type(e), e), e
                if x in self.logic.measures:
                    return G, self.measure_fun(e), e
                if self.logic.generated(x):
                    return G, self.generated_fun(e), e
                raise CheckError(f"unbound variable {x}", e.span)
            case Const(op, ann):
                return G, const_type(op, ann), e
            case App():
                return self.synth_app(G, e)
            case Ctor():
                return self.synth_spine(G, e, self.ctor_type(e),
                                        list(e.args), lambda args: replace(e, args=tuple(args)))
            case Lam():
                return G, self.synth_lam(G, e), e
            case Case():
                return self.synth_case(G, e)
            case Fix():
                raise CheckError("fix is only used internally", e.span)
        raise CheckError(f"cannot type {type(e).__name__}", e.span)

    def measure_fun(self, e: Var) -> RefType:
        m = self.logic.measures[e.name]
        t = subst_type_tvars(m.type, dict(e.inst))
        cod = t.cod
        x = t.param
        return Fun(x, t.dom, with_refinement(cod, _eq(Var(cod.var), App(e, Var(x)),
                                                      cod.base)))

    def generated_fun(self, e: Var) -> RefType:
        ctor, k = self.logic.generated(e.name)
        d, c = self.logic.ctor(ctor)
        sub = dict(e.inst)
        cod = BOOL if k < 0 else subst_shape(c.fields[k], sub)
        x = self.fresh("_g")
        return Fun(x, trivial(subst_shape(d.shape(), sub)),
                   Base("v", cod, _eq(Var("v"), App(e, Var(x)), cod)))

    def synth_app(self, G: Env, e: App) -> tuple[Env, RefType, Expr]:
        head, args = unwind(e)
        if isinstance(head, Lam):
            G, x, _ = self.let_bind(G, head, args[0])
            rest = substitute(head.body, head.param, Var(x)) if x != head.param else head.body
            from .core import apps
            return self.synth(G, apps(rest, *args[1:]) if args[1:] else rest)
        if isinstance(head, Var) and self.lookup(G, head.name) is None \
                and head.name in self.globals:
            t = self.global_type(head)
            G2, T, e2 = self.synth_spine(G, head, t, args, None, span=e.span)
            return G2, T, e2
        G, ht, h2 = self.synth(G, head)
        return self.synth_spine(G, h2, ht, args, None, span=e.span)

    def synth_spine(self, G: Env, head: Expr, t: RefType, args: list[Expr],
                    rebuild: Callable | None, span=None) -> tuple[Env, RefType, Expr]:
        atoms = []
        for a in args:
            if isinstance(t, Base) and isinstance(t.base, TArrow):
                t = trivial(t.base)
            if not isinstance(t, Fun):
                raise ArityMismatch(f"{show(head)} is applied to too many arguments",
                                    a.span or span)
            G, atom = self.argument(G, a, t.dom)
            atoms.append(atom)
            t = subst_type(t.cod, t.param, atom)
        if isinstance(head, Var) and self.lookup(G, head.name) is None and args:
            self.termination_call(G, head, atoms, span)
        if rebuild is not None:
            e2 = rebuild(atoms)
        else:
            from .core import apps
            e2 = apps(head, *atoms)
        return G, self.selfify(G, t, e2), e2

    def argument(self, G: Env, a: Expr, dom: RefType) -> tuple[Env, Expr]:
        """Check one argument; return the term that stands for it afterwards."""
        if isinstance(dom, Fun):
            if isinstance(a, Lam):
                self.check(G, a, dom)
                a2 = a
            else:
                G, ta, a2 = self.synth(G, a)
                self.subtype(G, ta, dom, a.span, a2)
            if isinstance(a2, Var) or self.tr(G, a2) is not None:
                return G, a2
            t = self.fresh("f")
            return self.bind(G, t, dom), Var(t)
        if _atomic(a) and not (isinstance(a, Var) and self.lookup(G, a.name) is None):
            G, ta, a2 = self.synth(G, a)
            self.subtype(G, ta, dom, a.span, a2)
            return G, a2
        G, ta, a2 = self.synth(G, a)
        self.subtype(G, ta, dom, a.span, a2)
        if isinstance(ta, Base) and isinstance(ta.base, TArrow) or isinstance(ta, Fun):
            if self.tr(G, a2) is not None:
                return G, a2
        t = self.fresh("t")
        if isinstance(ta, Fun):
            ta = trivial(erase(ta))
        return self.bind(G, t, ta), Var(t)

    def let_bind(self, G: Env, lam: Lam, rhs: Expr) -> tuple[Env, str, RefType]:
        G, t, r2 = self.synth(G, rhs)
        x = self.fresh(lam.param) if lam.param in self.used or self.lookup(G, lam.param) \
            else lam.param
        self.used.add(x)
        if isinstance(t, Fun) and lam.ann is not None:
            pass
        return self.bind(G, x, t), x, t

    def synth_lam(self, G: Env, e: Lam) -> RefType:
        y = self.fresh(e.param)
        dom = trivial(e.ann)
        G2 = self.bind(G, y, dom)
        body = substitute(e.body, e.param, Var(y))
        G3, tb, _ = self.synth(G2, body)
        names = {x for x, _ in G2}
        if isinstance(tb, Base):
            p = self.tr(G2, body)
            cod = Base("v", tb.base, _eq(Var("v"), body, tb.base) if p is not None else TRUE)
        elif type_free_vars(tb) <= names | self.globals.keys():
            cod = tb
        else:
            cod = trivial(erase(tb))
        return Fun(y, dom, cod)

    def synth_case(self, G: Env, e: Case) -> tuple[Env, RefType, Expr]:
        shapes = []

        def visit(Gi: Env, body: Expr) -> None:
            _, tb, _ = self.synth(Gi, body)
            shapes.append(erase(tb))

        self.case_alternatives(G, e, visit)
        shape = shapes[0]
        t = Base("v", shape)
        if self.tr(G, e) is not None and not isinstance(shape, TArrow):
            t = Base("v", shape, _eq(Var("v"), e, shape))
        return G, t, e

    # -- checking ----------------------------------------------------------

    def check(self, G: Env, e: Expr, t: RefType) -> None:
        match e:
            case Lam(x, body) if isinstance(t, Fun):
                y = self.fresh(t.param if t.param not in self.used else x)
                G2 = self.bind(G, y, t.dom)
                self.check(G2, substitute(body, x, Var(y)), rename_param(t, y))
                return
            case Case():
                self.case_alternatives(G, e, lambda Gi, b: self.check(Gi, b, t))
                return
            case App(Lam() as lam, rhs):
                G2, x, _ = self.let_bind(G, lam, rhs)
                body = substitute(lam.body, lam.param, Var(x)) if x != lam.param else lam.body
                self.check(G2, body, t)
                return
        G2, ts, e2 = self.synth(G, e)
        self.subtype(G2, ts, t, e.span, e2)

    def case_alternatives(self, G: Env, e: Case, k: Callable[[Env, Expr], None]) -> None:
        G, ts, s2 = self.synth(G, e.scrut)
        x = self.fresh(e.binder)
        facts = []
        if isinstance(ts, Base) and ts.down and ts.refinement != TRUE:
            facts.append(substitute(ts.refinement, ts.var, Var(x)))
        shape = erase(ts)
        for alt in e.alts:
            body = substitute(alt.body, e.binder, Var(x)) if e.binder != x else alt.body
            Gi = G
            if alt.ctor in ("True", "False"):
                path = Var(x) if alt.ctor == "True" else _not(Var(x))
                Gi = self.bind(Gi, x, Base(x, BOOL, conj([*facts, path])))
                k(Gi, body)
                continue
            sub = dict(zip(self.logic.datas[shape.name].tparams, shape.args))
            ct = subst_type_tvars(self.ctor_types[alt.ctor], sub)
            ren = {}
            for y, (p, dom) in zip(alt.binders, params(ct)):
                y2 = self.fresh(y) if y in self.used or self.lookup(Gi, y) else y
                self.used.add(y2)
                ren[y] = Var(y2)
                Gi = self.bind(Gi, y2, dom)
                ct = subst_type(ct.cod, p, Var(y2))
            body = subst_many(body, ren)
            r = substitute(ct.refinement, ct.var, Var(x))
            # the scrutinee is this constructor applied to the binders
            whole = Ctor(alt.ctor, tuple(ren[y] for y in alt.binders), tuple(sub.items()))
            r = conj([r, _eq(Var(x), whole, shape)])
            Gi = self.bind(Gi, x, Base(x, shape, conj([*facts, r])))
            k(Gi, body)

    def subtype(self, G: Env, t1: RefType, t2: RefType, span, e: Expr | None = None) -> None:
        if isinstance(t1, Base) and isinstance(t2, Base):
            if t2.refinement == TRUE:
                return
            if isinstance(t1.base, TArrow) or isinstance(t2.base, TArrow):
                if e is not None and self.tr(G, e) is not None:
                    self.obligation(G, substitute(t2.refinement, t2.var, e), span)
                    return
            w = self.fresh("v")
            t1w = Base(w, t1.base, substitute(t1.refinement, t1.var, Var(w)), t1.down)
            self.obligation(self.bind(G, w, t1w), substitute(t2.refinement, t2.var, Var(w)),
                            span)
            return
        if isinstance(t1, Fun) and isinstance(t2, Fun):
            self.subtype(G, t2.dom, t1.dom, span)
            y = self.fresh(t2.param)
            G2 = self.bind(G, y, t2.dom)
            self.subtype(G2, rename_param(t1, y), rename_param(t2, y), span)
            return
        if isinstance(t1, Fun) and isinstance(t2, Base):
            if t2.refinement == TRUE:
                return
            if e is not None and self.tr(G, e) is not None:
                self.obligation(G, substitute(t2.refinement, t2.var, e), span)
            else:
                self.fail("NotTranslatable", span,
                          "a refined function value needs a term the logic can express")
            return
        # a function value known only by its shape against a function type
        if _refined(t2):
            self.fail("Sub-Fun", span, "cannot recover a refined function type from a value")

    # -- termination -------------------------------------------------------

    def termination_call(self, G: Env, head: Var, atoms: list[Expr], span) -> None:
        callee = self.rec.get(head.name)
        if callee is None or self.caller is None:
            return
        mine = self.rec[self.caller]
        if callee.metric is None or mine.metric is None:
            self.fail("NoUsableMetric", span, f"no termination metric for {head.name}")
            return
        if len(callee.metric) != len(mine.metric):
            self.fail("NonDecreasingCall", span,
                      f"metrics of {self.caller} and {head.name} have different lengths")
            return
        needed = max((i for i, p in enumerate(callee.params)
                      if any(p in free_vars(m) for m in callee.metric)), default=-1) + 1
        if len(atoms) < needed:
            self.fail("NonDecreasingCall", span,
                      f"{head.name} is used without the arguments its metric "
                      f"[{', '.join(map(show, callee.metric))}] depends on")
            return
        sub = dict(zip(callee.params, atoms))
        new = [subst_many(m, sub) for m in callee.metric]
        old = list(mine.metric)
        dec = []
        for i in range(len(new)):
            parts = [_eq(new[j], old[j], INT) for j in range(i)]
            parts.append(_op("<", new[i], old[i]))
            dec.append(conj(parts))
        goal = dec[0]
        for d in dec[1:]:
            goal = _op("||", goal, d)
        nonneg = conj([_op("<=", IntLit(0), n) for n in new])
        shown = ", ".join(show(_source_form(n, G)) for n in new)
        self.obligation(G, _op("&&", goal, nonneg), span, "NonDecreasingCall",
                        f"metric [{shown}] must decrease below "
                        f"[{', '.join(map(show, old))}]{mine.note}")

    def default_metric(self, d: Definition, G: Env,
                       names: list[str]) -> tuple[tuple[Expr, ...] | None, str]:
        """The metric and, if it was picked among several measures, a note saying so."""
        if d.metric is not None:
            sub = {p: Var(n) for (p, _), n in zip(params(d.type), names)}
            return tuple(subst_many(m, sub) for m in d.metric), ""
        for (p, t), n in zip(params(d.type), names):
            if isinstance(t, Base) and t.base == INT:
                goal = _op("<=", IntLit(0), Var(n))
                pred = self.tr(G, goal)
                vc = VC(self.embed(G), pred)
                if isinstance(self.solve(vc), Valid):
                    return (Var(n),), ""
        for (p, t), n in zip(params(d.type), names):
            if isinstance(t, Base) and isinstance(t.base, TData):
                ms = [m for m in self.logic.measures_of(t.base.name) if erase(m.type.cod) == INT]
                if ms:
                    m = ms[0]
                    inst = tuple(zip((a.name for a in erase(m.type.dom).args
                                      if isinstance(a, TVar)), t.base.args))
                    note = ""
                    if len(ms) > 1:
                        note = (f" (default metric: first of the measures "
                                f"{', '.join(x.name for x in ms)}; give `/ [...]` to choose)")
                    return (App(Var(m.name, inst=inst), Var(n)),), note
        return None, ""

    # -- solving -----------------------------------------------------------

    def solve(self, vc: VC):
        vc = strengthen(vc, self.logic, self.config.instance_budget)
        return solve(vc, self.config.branch_budget, self.config.solver)

    def discharge(self, obs: list[Obligation]) -> None:
        for ob in obs:
            if ob.vc is None:
                ob.status = "FAIL"
                continue
            ob.vc = strengthen(ob.vc, self.logic, self.config.instance_budget)
            ob.verdict = solve(ob.vc, self.config.branch_budget, self.config.solver)
            if isinstance(ob.verdict, Valid):
                ob.status = "PASS"
            elif isinstance(ob.verdict, Unknown):
                ob.status = "UNKNOWN"
                ob.message = (ob.message + "; " if ob.message else "") + ob.verdict.reason
            else:
                ob.status = "FAIL"

    # -- definitions -------------------------------------------------------

    def run(self) -> list[Obligation]:
        p = self.program
        for d in p.datas:
            self.ctor_types.update(refine_constructors(d, p.measures))
        for m in p.measures:
            if m.name not in self.trusted:
                self.check_measure(m)
        for d in p.defs:
            self.kinds[d.name] = d.kind
            if d.kind != "reflect":
                self.globals[d.name] = d.type
        reflect_names = [d.name for d in p.defs if d.kind == "reflect"]
        groups = _sccs([d for d in p.defs if d.kind != "reflect"])
        for d in p.defs:
            self.current, self.current_span = d.name, d.span
            if d.name in self.trusted:
                if d.kind == "reflect":
                    self.globals[d.name] = exact_type(d.type, d.body)
                    self.logic.reflected[d.name] = d.type
                continue
            start = len(self.results)
            try:
                if d.kind == "reflect":
                    self.check_reflect(d, reflect_names)
                elif d.kind in ("let", "prop"):
                    self.check_def(d, groups.get(d.name, {d.name}), p)
            except (CheckError, ShapeError) as err:
                self.fail(err.kind, err.span or d.span, str(err))
            mine = self.results[start:]
            self.discharge(mine)
            if any(o.rule in ("NonDecreasingCall", "NoUsableMetric", "Termination")
                   and o.status != "PASS" for o in mine):
                self.drop_termination(d, groups.get(d.name, {d.name}))
        return self.results

    def drop_termination(self, d: Definition, group: set[str]) -> None:
        if d.kind == "reflect":
            self.logic.partial.add(d.name)
            self.globals[d.name] = _undown(self.globals[d.name])
            return
        for n in group:
            if n in self.globals:
                self.globals[n] = _undown(self.globals[n])

    def check_measure(self, m: MeasureDef) -> None:
        self.current, self.current_span = m.name, m.span
        start = len(self.results)
        res = m.type.cod
        dom = erase(m.type.dom)
        d = self.logic.datas[dom.name]
        sub = dict(zip(d.tparams, dom.args))
        for alt in m.alts:
            _, c = self.logic.ctor(alt.ctor)
            for y in alt.binders:
                self.used.add(y)
            for node in _calls(alt.body):
                if node.name == m.name and not (isinstance(node.arg, Var)
                                                 and node.arg.name in alt.binders):
                    self.fail("Termination", m.span,
                              f"measure {m.name} may only recurse on constructor fields")
            if res.refinement == TRUE:
                continue
            G: Env = tuple((y, trivial(subst_shape(f, sub))) for y, f in zip(alt.binders,
                                                                              c.fields))
            self.obligation(G, substitute(res.refinement, res.var, alt.body), m.span,
                            "Measure", f"result of {m.name} on {alt.ctor}")
        self.discharge(self.results[start:])

    def enter(self, d: Definition, t: RefType, body: Expr) -> tuple[Env, list[str], RefType,
                                                                  Expr]:
        """Bind the leading lambdas of ``body`` to the parameters of ``t``."""
        G: Env = ()
        names = []
        while isinstance(t, Fun) and isinstance(body, Lam):
            n = t.param
            self.used.add(n)
            G = self.bind(G, n, t.dom)
            body = substitute(body.body, body.param, Var(n)) if body.param != n else body.body
            names.append(n)
            t = t.cod
        return G, names, t, body

    def setup_recursion(self, d: Definition, group: Iterable[str], recursive: bool) -> None:
        self.rec = {}
        self.caller = None
        if not recursive:
            return
        for n in group:
            other = next(x for x in self.program.defs if x.name == n)
            Gp, names, _, _ = self.enter(other, other.type, other.body)
            metric, note = self.default_metric(other, Gp, names)
            self.rec[n] = _Rec(names, metric, note)
        self.caller = d.name

    def check_reflect(self, d: Definition, reflect_names: list[str]) -> None:
        earlier = set(reflect_names[:reflect_names.index(d.name)])
        for n in sorted(_global_refs(d.body) | _type_refs(d.type)):
            if n == d.name or n in earlier or n in self.logic.measures \
                    or self.logic.generated(n):
                continue
            if n in self.kinds or n in reflect_names:
                self.fail("Reflect", d.span,
                          f"{d.name} may only use itself and earlier reflected functions, "
                          f"not {n}")
                return
        et = exact_type(d.type, d.body)
        self.globals[d.name] = et
        self.logic.reflected[d.name] = d.type
        self.used = set()
        recursive = d.name in _global_refs(d.body)
        self.setup_recursion(d, [d.name], recursive)
        G, names, t, body = self.enter(d, et, d.body)
        if recursive:
            self.require_metric(d)
        self.check(G, body, t)
        self.rec, self.caller = {}, None

    def check_def(self, d: Definition, group: set[str], p: Program) -> None:
        self.used = set()
        recursive = bool(_global_refs(d.body) & group)
        self.setup_recursion(d, group, recursive)
        G, names, t, body = self.enter(d, d.type, d.body)
        if recursive:
            self.require_metric(d)
        self.check(G, body, t)
        self.rec, self.caller = {}, None

    def require_metric(self, d: Definition) -> None:
        # non-negativity is part of each call's decrease VC, not a precondition
        if self.rec[d.name].metric is None:
            self.fail("NoUsableMetric", d.span, f"{d.name} is recursive but has no usable "
                      "termination metric")


def _definition_of(x: str, t: RefType) -> Expr | None:
    """``e`` when ``t`` says ``v = e`` for the variable it refines."""
    if not isinstance(t, Base):
        return None
    stack = [t.refinement]
    while stack:
        r = stack.pop()
        if isinstance(r, App) and isinstance(r.fn, App) and isinstance(r.fn.fn, Const):
            op, l, rhs = r.fn.fn.op, r.fn.arg, r.arg
            if op == "&&":
                stack += [l, rhs]
            elif op == "=" and l == Var(t.var) and t.var not in free_vars(rhs):
                return rhs
    return None


def _source_form(e: Expr, G: Env) -> Expr:
    """``e`` with ANF temporaries replaced by what they name, for messages."""
    defs = dict(G)
    for _ in range(len(G)):
        temps = [x for x in free_vars(e) if "'" in x and x in defs]
        sub = {x: d for x in temps if (d := _definition_of(x, defs[x])) is not None}
        if not sub:
            break
        e = subst_many(e, sub)
    return e


def _refined(t: RefType) -> bool:
    if isinstance(t, Base):
        return t.refinement != TRUE
    return _refined(t.dom) or _refined(t.cod)


def _undown(t: RefType) -> RefType:
    if isinstance(t, Fun):
        return Fun(t.param, t.dom, _undown(t.cod))
    return replace(t, down=False)


def _calls(e: Expr):
    """Applications ``Var m x`` anywhere in ``e`` (measure recursion)."""
    match e:
        case App(Var(), _):
            yield _Call(e.fn.name, e.arg)
            yield from _calls(e.arg)
        case App(f, a):
            yield from _calls(f)
            yield from _calls(a)
        case Lam(_, b):
            yield from _calls(b)
        case Ctor(_, args):
            for a in args:
                yield from _calls(a)
        case Case(_, s, alts):
            yield from _calls(s)
            for a in alts:
                yield from _calls(a.body)


@dataclass
class _Call:
    name: str
    arg: Expr


def _global_refs(e: Expr | None) -> set[str]:
    return set(free_vars(e)) if e is not None else set()


def _type_refs(t: RefType) -> set[str]:
    return set(type_free_vars(t))


def _sccs(defs: list[Definition]) -> dict[str, set[str]]:
    """Strongly connected components of the reference graph (Tarjan)."""
    names = {d.name for d in defs}
    graph = {d.name: sorted(_global_refs(d.body) & names) for d in defs}
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    stack: list[str] = []
    on: set[str] = set()
    out: dict[str, set[str]] = {}
    counter = [0]

    def visit(v: str) -> None:
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on.add(v)
        for w in graph[v]:
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = set()
            while True:
                w = stack.pop()
                on.discard(w)
                comp.add(w)
                if w == v:
                    break
            for w in comp:
                out[w] = comp

    for d in defs:
        if d.name not in index:
            visit(d.name)
    return out


# -- entry points --------------------------------------------------------------


def check_obligations(p: Program, config: Config = Config(),
                      trusted: Iterable[str] = ()) -> list[Obligation]:
    """Every obligation of ``p`` with its verdict, in program order.

    Definitions named in ``trusted`` (typically the already verified
    prelude) are taken at their declared types without being rechecked.
    """
    try:
        annotated = annotate_program(p)
    except ShapeError as err:
        return [Obligation(_enclosing(p, err.span), err.kind, err.span, None, str(err))]
    return Checker(annotated, config, trusted).run()


def _enclosing(p: Program, span: Span | None) -> str:
    """The declaration whose text contains ``span``."""
    if span is not None:
        for d in [*p.measures, *p.defs]:
            if d.span is not None and d.span.start <= span.start <= d.span.end:
                return d.name
    return ""


def check_program(p: Program, config: Config = Config()) -> list[Diagnostic]:
    """The failed obligations; an empty list means the program is accepted."""
    return [o for o in check_obligations(p, config) if o.status != "PASS"]


def termination_check(p: Program, name: str, config: Config = Config()) -> list[Obligation]:
    """The termination obligations of one definition of ``p``."""
    rules = ("NonDecreasingCall", "NoUsableMetric", "Termination")
    return [o for o in check_obligations(p, config) if o.definition == name
            and o.rule in rules]
