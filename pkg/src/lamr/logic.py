"""Translation of refinements into the decidable logic.

Functions stay first-order: every function-sorted value is a constant of
some ``Fun_a_b`` sort, application goes through ``app_a_b`` and a lambda
becomes ``lam_a_b`` over a binder drawn from a small per-sort pool.  The
binder index of each lambda is one more than the largest index of its
sort used inside the body, which makes alpha-equivalent lambdas
syntactically identical in the common case.

Polymorphic symbols are monomorphised by sort: a type variable that shows
up outside a data type in the symbol's type is instantiated in the symbol
name (``C@Int``), so a list of integers and a list of unknowns never
share selectors of different sorts.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .core import (ARITY, App, Base, BoolLit, Case, Const, Ctor, CtorDecl, DataDecl, Expr,
                   Fix, IntLit, Lam, MeasureDef, Program, RefType, Shape, TArrow, TBool, TData,
                   TInt,
                   TVar, UnitLit, Var, erase, shape_tvars, subst_shape, subst_tvars,
                   substitute, unwind)
from .pred import (PTRUE, S_BOOL, S_INT, S_UNIV, PApp, PBin, PBool, PInt, PIte, PNot, PVar,
                   Pred, SFun, Sort, children, conjuncts, p_and, psubst, simplify, sort_of,
                   subterms, to_sexpr)

POOL_SIZE = 8
INSTANCE_BUDGET = 64


class NotTranslatable(Exception):
    pass


class PoolExhausted(NotTranslatable):
    pass


def embed(s: Shape) -> Sort:
    match s:
        case TInt():
            return S_INT
        case TBool():
            return S_BOOL
        case TArrow(d, c):
            return SFun(embed(d), embed(c))
    return S_UNIV


def _direct_tvars(s: Shape) -> list[str]:
    """Type variables whose instantiation changes the embedded sort."""
    match s:
        case TVar(n):
            return [n]
        case TArrow(d, c):
            return _direct_tvars(d) + _direct_tvars(c)
    return []


def app_symbol(s: SFun) -> str:
    return "app" + str(s)[3:]


def lam_symbol(s: SFun) -> str:
    return "lam" + str(s)[3:]


def pool_var(s: Sort, i: int) -> PVar:
    return PVar(f"x{i}${s}", s)


def pool_index(p: Pred) -> int | None:
    if isinstance(p, PVar) and p.name.startswith("x") and "$" in p.name:
        head = p.name[1:p.name.index("$")]
        if head.isdigit():
            return int(head)
    return None


def is_lam(p: Pred) -> bool:
    return isinstance(p, PApp) and p.fn.startswith("lam_") and len(p.args) == 2


def is_app(p: Pred) -> bool:
    return isinstance(p, PApp) and p.fn.startswith("app_") and len(p.args) == 2


def maxlam(s: Sort, p: Pred) -> int:
    """Largest pool index of sort ``s`` bound by a lambda inside ``p``."""
    best = 0
    for q in subterms(p):
        if is_lam(q) and q.args[0].sort == s:
            best = max(best, pool_index(q.args[0]) or 0)
    return best


# -- the environment ---------------------------------------------------------


@dataclass
class LogicEnv:
    """Global symbols the logic knows about."""

    datas: dict[str, DataDecl] = field(default_factory=dict)
    measures: dict[str, MeasureDef] = field(default_factory=dict)
    reflected: dict[str, RefType] = field(default_factory=dict)
    pool: int = POOL_SIZE
    # mangled symbol -> (source name, type substitution)
    ctor_syms: dict[str, tuple[str, dict]] = field(default_factory=dict)
    measure_syms: dict[str, tuple[str, dict]] = field(default_factory=dict)
    # reflected functions whose termination check failed: not in the logic
    partial: set[str] = field(default_factory=set)
    _ctors: dict[str, tuple[DataDecl, int]] = field(default_factory=dict)

    @classmethod
    def for_program(cls, p: Program, pool: int = POOL_SIZE) -> "LogicEnv":
        """Data types and measures of ``p``; reflected functions are added by the checker."""
        env = cls(pool=pool)
        for d in p.datas:
            env.add_data(d)
        for m in p.measures:
            env.measures[m.name] = m
        return env

    def add_data(self, d: DataDecl) -> None:
        self.datas[d.name] = d
        for i, c in enumerate(d.ctors):
            self._ctors[c.name] = (d, i)

    def ctor(self, name: str) -> tuple[DataDecl, CtorDecl]:
        d, i = self._ctors[name]
        return d, d.ctors[i]

    def is_ctor(self, name: str) -> bool:
        return name in self._ctors

    def measures_of(self, data: str) -> list[MeasureDef]:
        return [m for m in self.measures.values() if m.data == data]

    # symbol naming -------------------------------------------------------

    def mangle(self, name: str, scheme: Shape, sub: Mapping[str, Shape]) -> str:
        rel = list(dict.fromkeys(_direct_tvars(scheme)))
        sorts = [embed(sub.get(a, TVar(a))) for a in rel]
        if all(s == S_UNIV for s in sorts):
            return name
        return name + "".join(f"@{s}" for s in sorts)

    def ctor_symbol(self, name: str, sub: Mapping[str, Shape]) -> str:
        d, c = self.ctor(name)
        scheme = _arrow(c.fields, d.shape())
        sym = self.mangle(name, scheme, sub)
        self.ctor_syms.setdefault(sym, (name, dict(sub)))
        return sym

    def selector(self, name: str, i: int, sub: Mapping[str, Shape]) -> tuple[str, Sort]:
        d, c = self.ctor(name)
        f = c.fields[i]
        sym = self.mangle(f"sel_{name}_{i + 1}", f, sub)
        return sym, embed(subst_shape(f, dict(sub)))

    def checker(self, name: str) -> str:
        return f"is_{name}"

    def generated(self, name: str) -> tuple[str, int] | None:
        """``is_D`` or ``sel_D_i`` as (constructor, field index or -1)."""
        if name.startswith("is_") and name[3:] in self._ctors:
            return name[3:], -1
        if name.startswith("sel_"):
            ctor, _, idx = name[4:].rpartition("_")
            if ctor in self._ctors and idx.isdigit():
                k = int(idx) - 1
                if 0 <= k < len(self.ctor(ctor)[1].fields):
                    return ctor, k
        return None

    def measure_symbol(self, name: str, sub: Mapping[str, Shape]) -> tuple[str, Sort]:
        m = self.measures[name]
        scheme = erase(m.type)
        sym = self.mangle(name, scheme, sub)
        self.measure_syms.setdefault(sym, (name, dict(sub)))
        return sym, embed(subst_shape(scheme.cod, dict(sub)))


def _arrow(doms: Iterable[Shape], cod: Shape) -> Shape:
    out = cod
    for d in reversed(list(doms)):
        out = TArrow(d, out)
    return out


def _inst(pairs) -> dict[str, Shape]:
    return dict(pairs)


# -- expressions to predicates -----------------------------------------------

_BIN = {"=": "=", "<": "<", "<=": "<=", "&&": "&&", "||": "||", "+": "+", "-": "-", "*": "*"}
_UVAR = {"=": "eq", "<": "lt", "<=": "le", "&&": "and", "||": "or", "not": "not", "+": "plus",
         "-": "minus", "*": "times"}

_placeholders = itertools.count()


def translate(e: Expr, rho: Mapping[str, Pred], env: LogicEnv) -> Pred:
    """The predicate denoting ``e``; locals are looked up in ``rho``."""
    match e:
        case IntLit(n):
            return PInt(n)
        case BoolLit(b):
            return PBool(b)
        case UnitLit():
            return PApp("unit", (), S_UNIV)
        case Var(n, inst):
            if n in rho:
                return rho[n]
            if n in env.reflected and n not in env.partial:
                scheme = erase(env.reflected[n])
                sub = _inst(inst)
                return PApp(env.mangle(n, scheme, sub), (), embed(subst_shape(scheme, sub)))
            if n in env.measures:
                m = env.measures[n]
                sub = _inst(inst)
                dom = subst_shape(erase(m.type.dom), sub)
                y = f"eta?{next(_placeholders)}"
                return translate(Lam(y, App(e, Var(y)), dom), rho, env)
            raise NotTranslatable(f"{n} is not part of the logic")
        case Const(op, ann):
            if ann is None and op == "=":
                raise NotTranslatable("unannotated equality")
            return PApp(f"uvar_{_UVAR[op]}", (), embed(_const_shape(op, ann)))
        case App():
            head, args = unwind(e)
            if isinstance(head, Const) and len(args) >= ARITY[head.op]:
                k = ARITY[head.op]
                ps = [translate(a, rho, env) for a in args[:k]]
                if head.op == "not":
                    p = PNot(ps[0])
                else:
                    p = PBin(_BIN[head.op], ps[0], ps[1])
                return _apply(p, args[k:], rho, env)
            if isinstance(head, Var) and head.name not in rho and env.generated(head.name):
                ctor, k = env.generated(head.name)
                arg = translate(args[0], rho, env)
                if k < 0:
                    p = PApp(env.checker(ctor), (arg,), S_BOOL)
                else:
                    sym, s = env.selector(ctor, k, _inst(head.inst))
                    p = PApp(sym, (arg,), s)
                return _apply(p, args[1:], rho, env)
            if isinstance(head, Var) and head.name not in rho and head.name in env.measures:
                sym, res = env.measure_symbol(head.name, _inst(head.inst))
                p = PApp(sym, (translate(args[0], rho, env),), res)
                return _apply(p, args[1:], rho, env)
            return _apply(translate(head, rho, env), args, rho, env)
        case Ctor(n, args, inst):
            sym = env.ctor_symbol(n, _inst(inst))
            return PApp(sym, tuple(translate(a, rho, env) for a in args), S_UNIV)
        case Lam(x, body, ann):
            if ann is None:
                raise NotTranslatable("lambda without a binder shape")
            sx = embed(ann)
            hole = PVar(f"?{x}{next(_placeholders)}", sx)
            pb = translate(body, {**rho, x: hole}, env)
            i = maxlam(sx, pb) + 1
            if i > env.pool:
                raise PoolExhausted(f"more than {env.pool} nested lambdas over {sx}")
            binder = pool_var(sx, i)
            pb = psubst(pb, {hole: binder})
            fs = SFun(sx, sort_of(pb))
            return PApp(lam_symbol(fs), (binder, pb), fs)
        case Case(x, scrut, alts, ann):
            ps = translate(scrut, rho, env)
            if {a.ctor for a in alts} <= {"True", "False"}:
                branch = {a.ctor: a for a in alts}
                inner = {**rho, x: ps}
                t = translate(branch["True"].body, inner, env) if "True" in branch else None
                f = translate(branch["False"].body, inner, env) if "False" in branch else None
                if t is None or f is None:
                    return t if f is None else f
                return PIte(ps, t, f)
            if not isinstance(ann, TData):
                raise NotTranslatable("case without a scrutinee shape")
            d = env.datas[ann.name]
            sub = dict(zip(d.tparams, ann.args))
            out: Pred | None = None
            for alt in reversed(alts):
                _, c = env.ctor(alt.ctor)
                inner = {**rho, x: ps}
                for i, y in enumerate(alt.binders):
                    sym, s = env.selector(alt.ctor, i, sub)
                    inner[y] = PApp(sym, (ps,), s)
                body = translate(alt.body, inner, env)
                if out is None:
                    out = body
                else:
                    out = PIte(PApp(env.checker(alt.ctor), (ps,), S_BOOL), body, out)
            return out
        case Fix():
            raise NotTranslatable("recursive binding inside a refinement")
    raise NotTranslatable(type(e).__name__)


def _const_shape(op: str, ann: Shape | None) -> Shape:
    from .core import BOOL, INT
    if op in ("+", "-", "*"):
        return TArrow(INT, TArrow(INT, INT))
    if op in ("<", "<="):
        return TArrow(INT, TArrow(INT, BOOL))
    if op in ("&&", "||"):
        return TArrow(BOOL, TArrow(BOOL, BOOL))
    if op == "not":
        return TArrow(BOOL, BOOL)
    return TArrow(ann, TArrow(ann, BOOL))


def _apply(p: Pred, args: list[Expr], rho, env) -> Pred:
    for a in args:
        s = sort_of(p)
        if not isinstance(s, SFun):
            raise NotTranslatable(f"applying a value of sort {s}")
        pa = translate(a, rho, env)
        if sort_of(pa) != s.arg:
            raise NotTranslatable(f"argument of sort {sort_of(pa)} where {s.arg} expected")
        p = PApp(app_symbol(s), (p, pa), s.res)
    return p


# -- verification conditions -------------------------------------------------


@dataclass(frozen=True)
class VC:
    hyp: Pred
    goal: Pred
    instances: tuple[Pred, ...] = ()
    budget_hit: bool = False

    def decls(self) -> list[tuple[str, str]]:
        return declarations([*self.instances, self.hyp, self.goal])


def local_rho(bindings: Iterable[tuple[str, RefType]]) -> dict[str, Pred]:
    return {x: PVar(x, embed(erase(t))) for x, t in bindings}


def embed_env(bindings: list[tuple[str, RefType]], env: LogicEnv,
              rho: Mapping[str, Pred] | None = None) -> Pred:
    """The conjunction of what the environment knows.

    Only terminating base bindings contribute; a refinement that cannot be
    translated is dropped, which only weakens the hypothesis.
    """
    rho = rho or local_rho(bindings)
    parts = []
    for x, t in bindings:
        if not isinstance(t, Base) or not t.down:
            continue
        if t.refinement == BoolLit(True):
            continue
        r = t.refinement if t.var == x else substitute(t.refinement, t.var, Var(x))
        try:
            parts.append(translate(r, rho, env))
        except NotTranslatable:
            continue
    return p_and(*parts)


def make_vc(bindings: list[tuple[str, RefType]], goal: Expr, env: LogicEnv) -> VC:
    rho = local_rho(bindings)
    return VC(embed_env(bindings, env, rho), translate(goal, rho, env))


# -- instances -----------------------------------------------------------------


def _terms(preds: Iterable[Pred], seen: set[Pred] | None = None) -> list[Pred]:
    """Distinct subterms of ``preds`` not already in ``seen`` (updated)."""
    seen = set() if seen is None else seen
    out = []
    stack = list(preds)
    while stack:
        q = stack.pop()
        if q in seen:
            continue
        seen.add(q)
        out.append(q)
        stack.extend(children(q))
    return out


def alpha_instances(terms: Iterable[Pred]) -> list[Pred]:
    """Renamings of each lambda to every other pool binder of its sort."""
    terms = list(terms)
    binders: dict[Sort, set[int]] = {}
    for q in terms:
        i = pool_index(q)
        if i is not None:
            binders.setdefault(q.sort, set()).add(i)
    out = []
    for q in terms:
        if not is_lam(q):
            continue
        x, body = q.args
        i = pool_index(x)
        free = {pool_index(v) for v in subterms(body) if isinstance(v, PVar) and v.sort == x.sort}
        for j in sorted(binders.get(x.sort, ())):
            if j <= i or j in free:
                continue
            y = pool_var(x.sort, j)
            out.append(PBin("=", q, PApp(q.fn, (y, psubst(body, {x: y})), q.sort)))
    return out


def _lam_free(p: Pred) -> bool:
    return not any(is_lam(q) for q in subterms(p))


def beta_instances(terms: Iterable[Pred]) -> list[Pred]:
    """One reduction step for each redex whose argument is lambda-free."""
    out = []
    for q in terms:
        if is_app(q) and is_lam(q.args[0]) and _lam_free(q.args[1]):
            x, body = q.args[0].args
            out.append(PBin("=", q, psubst(body, {x: q.args[1]})))
    return out


def datatype_instances(terms: Iterable[Pred], env: LogicEnv) -> list[Pred]:
    """Ground facts about constructor terms and measure applications.

    These stand in for a datatype theory: testers and selectors evaluate on
    constructor terms, measures unfold one step on them, and a measure's
    declared output refinement holds of each of its applications.
    """
    out = []
    for q in terms:
        if not isinstance(q, PApp):
            continue
        if q.fn in env.ctor_syms:
            name, sub = env.ctor_syms[q.fn]
            d, c = env.ctor(name)
            for other in d.ctors:
                test = PApp(env.checker(other.name), (q,), S_BOOL)
                out.append(test if other.name == name else PNot(test))
            for i, a in enumerate(q.args):
                sym, s = env.selector(name, i, sub)
                out.append(PBin("=", PApp(sym, (q,), s), a))
            for m in env.measures_of(d.name):
                alt = next((a for a in m.alts if a.ctor == name), None)
                if alt is None:
                    continue
                msub = _measure_sub(m, sub, env)
                sym, _ = env.measure_symbol(m.name, msub)
                rho = dict(zip(alt.binders, q.args))
                try:
                    rhs = translate(subst_tvars(alt.body, msub), rho, env)
                except NotTranslatable:
                    continue
                out.append(PBin("=", PApp(sym, (q,), sort_of(rhs)), rhs))
        elif q.fn in env.measure_syms:
            name, sub = env.measure_syms[q.fn]
            res = env.measures[name].type.cod
            if isinstance(res, Base) and res.refinement != BoolLit(True):
                r = subst_tvars(res.refinement, sub)
                try:
                    out.append(translate(r, {res.var: q}, env))
                except NotTranslatable:
                    continue
    return out


def _measure_sub(m: MeasureDef, data_sub: Mapping[str, Shape], env: LogicEnv) -> dict:
    """Instantiate a measure's own type variables from its data argument."""
    dom = erase(m.type.dom)
    d = env.datas[dom.name]
    out = {}
    for a, actual in zip(dom.args, (data_sub.get(p, TVar(p)) for p in d.tparams)):
        if isinstance(a, TVar):
            out[a.name] = actual
    return out


def strengthen(vc: VC, env: LogicEnv, budget: int = INSTANCE_BUDGET) -> VC:
    """Add alpha-, beta- and datatype instances up to a fixed point.

    Only alpha/beta instances count against ``budget``; when it runs out the
    VC is returned with ``budget_hit`` set.
    """
    insts: dict[Pred, None] = {}
    used = 0
    hit = False
    seen: set[Pred] = set()
    every = _terms([vc.hyp, vc.goal], seen)
    new = every
    for _round in range(64):
        fresh: dict[Pred, None] = {}
        for p in alpha_instances(every) + beta_instances(new):
            p = simplify(p)
            if p == PTRUE or p in insts or p in fresh:
                continue
            if used >= budget:
                hit = True
                break
            used += 1
            fresh[p] = None
        for p in datatype_instances(new, env):
            p = simplify(p)
            if p != PTRUE and p not in insts:
                fresh[p] = None
        if not fresh:
            break
        insts.update(fresh)
        new = _terms(fresh, seen)
        every = every + new
    return VC(vc.hyp, vc.goal, tuple(insts), hit)


def _links(p: Pred) -> set:
    return {q for q in subterms(p) if isinstance(q, PVar) or (isinstance(q, PApp) and q.args)}


def slice_vc(vc: VC) -> VC:
    """Keep only the facts connected to the goal through shared terms.

    Dropping hypotheses can only turn a valid VC into an invalid one, so a
    Valid verdict on the slice is a Valid verdict on the whole.
    """
    facts = list(dict.fromkeys([*conjuncts(vc.hyp), *vc.instances]))
    links = [_links(f) for f in facts]
    reach = _links(vc.goal)
    keep = [False] * len(facts)
    changed = True
    while changed:
        changed = False
        for i, f in enumerate(facts):
            if not keep[i] and (links[i] & reach or not links[i]):
                keep[i] = True
                reach |= links[i]
                changed = True
    kept = [f for f, k in zip(facts, keep) if k]
    return VC(p_and(*kept), vc.goal, (), vc.budget_hit)


# -- rendering ---------------------------------------------------------------


def declarations(preds: Iterable[Pred]) -> list[tuple[str, str]]:
    """(symbol, signature) for every uninterpreted symbol, sorted by name."""
    sig: dict[str, str] = {}
    for p in preds:
        for q in subterms(p):
            if isinstance(q, PVar):
                sig.setdefault(q.name, str(q.sort))
            elif isinstance(q, PApp):
                args = " ".join(str(sort_of(a)) for a in q.args)
                sig.setdefault(q.fn, f"({args}) {q.sort}" if q.args else str(q.sort))
    return sorted(sig.items())


def render_vc(vc: VC) -> str:
    lines = ["decls:"]
    lines += [f"  {n} : {s}" for n, s in vc.decls()]
    lines.append(f"hyp: {to_sexpr(vc.hyp)}")
    lines.append("inst:")
    lines += [f"  {to_sexpr(p)}" for p in vc.instances]
    lines.append(f"goal: {to_sexpr(vc.goal)}")
    return "\n".join(lines)


def query(vc: VC) -> list[Pred]:
    """The conjunction whose unsatisfiability is the VC's validity."""
    return [*vc.instances, vc.hyp, PNot(vc.goal)]
