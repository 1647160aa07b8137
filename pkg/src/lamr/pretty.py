"""Print core programs back as surface syntax.

The output is deliberately over-parenthesised: the only promise is that
parsing it gives back the same program up to renaming of bound variables.
"""
from __future__ import annotations

from .core import (TRUE, Alt, App, Base, BoolLit, Case, Const, Ctor, DataDecl, Definition,
                   Expr, Fix, Fun, IntLit, Lam, MeasureDef, Program, RefType, Shape, TArrow,
                   TBool, TData, TInt, TUnit, TVar, UnitLit, Var, alpha_eq, fresh, free_vars,
                   substitute)

_INFIX = {"+", "-", "*", "=", "<", "<=", "&&", "||"}


def _name(n: str) -> str:
    return n if n[0].isalpha() or n[0] == "_" else f"({n})"


def shape(s: Shape, atomic: bool = False) -> str:
    match s:
        case TInt():
            return "Int"
        case TBool():
            return "Bool"
        case TUnit():
            return "Unit"
        case TVar(n):
            return n
        case TData(n, args):
            out = " ".join([n, *(shape(a, True) for a in args)])
            return f"({out})" if args and atomic else out
        case TArrow(d, c):
            out = f"{shape(d, True)} -> {shape(c)}"
            return f"({out})" if atomic else out
    raise TypeError(s)


def expr(e: Expr) -> str:
    match e:
        case IntLit(n):
            return str(n) if n >= 0 else f"({n})"
        case BoolLit(b):
            return "True" if b else "False"
        case UnitLit():
            return "()"
        case Var(n):
            return _name(n)
        case Const(op):
            return "not" if op == "not" else f"({op})"
        case App(App(Const(op), l), r) if op in _INFIX:
            return f"({expr(l)} {op} {expr(r)})"
        case App(f, a):
            head = expr(f) if isinstance(f, App) and not _is_infix(f) else _atom(f)
            return f"{head} {_atom(a)}"
        case Lam(x, b):
            return f"(\\{x} -> {expr(b)})"
        case Ctor(n, args):
            if not args:
                return n
            return "(" + " ".join([n, *map(_atom, args)]) + ")"
        case Case(_, s, alts):
            inner = "; ".join(_alt(a) for a in alts)
            return f"(case {expr(s)} of {{ {inner} }})"
        case Fix(f, b):
            raise ValueError(f"fix {f} has no surface syntax")
    raise TypeError(e)


def value(e: Expr) -> str:
    """A result for display: lists as literals, no outer parentheses."""
    items = _list_items(e)
    if items is not None:
        return "[" + ", ".join(value(x) for x in items) + "]"
    match e:
        case IntLit(n):
            return str(n)
        case Ctor(n, args) if args:
            return " ".join([n, *map(_value_atom, args)])
    return expr(e)


def _value_atom(e: Expr) -> str:
    s = value(e)
    if (isinstance(e, Ctor) and e.args and _list_items(e) is None) or \
            (isinstance(e, IntLit) and e.value < 0):
        return f"({s})"
    return s


def _list_items(e: Expr) -> list[Expr] | None:
    out = []
    while isinstance(e, Ctor) and e.name == "Cons" and len(e.args) == 2:
        out.append(e.args[0])
        e = e.args[1]
    if isinstance(e, Ctor) and e.name == "Nil" and not e.args:
        return out
    return None


def _is_infix(e: Expr) -> bool:
    return isinstance(e, App) and isinstance(e.fn, App) and isinstance(e.fn.fn, Const) \
        and e.fn.fn.op in _INFIX


def _atom(e: Expr) -> str:
    s = expr(e)
    if isinstance(e, App) and not _is_infix(e):
        return f"({s})"
    return s


def _alt(a: Alt) -> str:
    return " ".join([a.ctor, *a.binders]) + f" -> {expr(a.body)}"


def reftype(t: RefType, atomic: bool = False) -> str:
    if isinstance(t, Fun):
        dom = reftype(t.dom, True)
        out = f"{t.param}:{dom} -> {reftype(t.cod)}"
        return f"({out})" if atomic else out
    if t.refinement == TRUE and not isinstance(t.base, TArrow):
        return shape(t.base, atomic)
    return f"{{{t.var}:{shape(t.base)} | {expr(t.refinement)}}}"


def data(d: DataDecl) -> str:
    ctors = " | ".join(" ".join([c.name, *(shape(f, True) for f in c.fields)])
                       for c in d.ctors)
    return "data " + " ".join([d.name, *d.tparams]) + f" = {ctors};"


def measure(m: MeasureDef) -> str:
    lines = [f"measure {m.name} :: {reftype(m.type)};"]
    for a in m.alts:
        pat = a.ctor if not a.binders else "(" + " ".join([a.ctor, *a.binders]) + ")"
        lines.append(f"{m.name} {pat} = {expr(a.body)};")
    return "\n".join(lines)


def definition(d: Definition) -> str:
    head = f"{d.kind} {_name(d.name)} :: {reftype(d.type)}"
    if d.metric is not None:
        head += " / [" + ", ".join(expr(m) for m in d.metric) + "]"
    if d.body is None:
        return head + ";"
    return f"{head};\n{_name(d.name)} = {expr(d.body)};"


def program(p: Program) -> str:
    parts = [data(d) for d in p.datas]
    parts += [measure(m) for m in p.measures]
    parts += [definition(d) for d in p.defs]
    return "\n\n".join(parts) + "\n"


# -- comparison up to bound names ----------------------------------------------


def type_alpha_eq(a: RefType, b: RefType) -> bool:
    match a, b:
        case Fun(x, d1, c1), Fun(y, d2, c2):
            if not type_alpha_eq(d1, d2):
                return False
            if x != y:
                z = fresh("_q", _type_names(c1) | _type_names(c2))
                c1, c2 = _rename(c1, x, z), _rename(c2, y, z)
            return type_alpha_eq(c1, c2)
        case Base(v, s1, r1, k1), Base(w, s2, r2, k2):
            if s1 != s2 or k1 != k2:
                return False
            if v != w:
                z = fresh("_q", free_vars(r1) | free_vars(r2))
                r1, r2 = substitute(r1, v, Var(z)), substitute(r2, w, Var(z))
            return alpha_eq(r1, r2)
    return False


def _type_names(t: RefType) -> frozenset[str]:
    if isinstance(t, Fun):
        return _type_names(t.dom) | _type_names(t.cod) | {t.param}
    return free_vars(t.refinement) | {t.var}


def _rename(t: RefType, x: str, z: str) -> RefType:
    if isinstance(t, Fun):
        cod = t.cod if t.param == x else _rename(t.cod, x, z)
        return Fun(t.param, _rename(t.dom, x, z), cod)
    if t.var == x:
        return t
    return Base(t.var, t.base, substitute(t.refinement, x, Var(z)), t.down)


def _param_names(t: RefType) -> list[str]:
    out = []
    while isinstance(t, Fun):
        out.append(t.param)
        t = t.cod
    return out


def program_alpha_eq(a: Program, b: Program) -> bool:
    """Same declarations in the same order, up to renaming of binders."""
    if a.datas != b.datas or len(a.measures) != len(b.measures) or len(a.defs) != len(b.defs):
        return False
    for m, n in zip(a.measures, b.measures):
        if m.name != n.name or not type_alpha_eq(m.type, n.type) or len(m.alts) != len(n.alts):
            return False
        for x, y in zip(m.alts, n.alts):
            if not alpha_eq(_lam_chain(x.binders, x.body), _lam_chain(y.binders, y.body)):
                return False
    for d, e in zip(a.defs, b.defs):
        if (d.kind, d.name) != (e.kind, e.name) or not type_alpha_eq(d.type, e.type):
            return False
        if (d.body is None) != (e.body is None):
            return False
        if d.body is not None and not alpha_eq(d.body, e.body):
            return False
        if (d.metric is None) != (e.metric is None):
            return False
        if d.metric is not None:
            pd, pe = _param_names(d.type), _param_names(e.type)
            if len(d.metric) != len(e.metric):
                return False
            for m, n in zip(d.metric, e.metric):
                if not alpha_eq(_lam_chain(tuple(pd), m), _lam_chain(tuple(pe), n)):
                    return False
    return True


def _lam_chain(names: tuple[str, ...], body: Expr) -> Expr:
    for n in reversed(names):
        body = Lam(n, body)
    return body
