"""Concrete syntax: lexer, parser, equation desugaring and the prelude.

The syntax is layout-free.  Every declaration and every defining equation
ends with ``;``, a definition's equations follow its signature, and case
alternatives sit in braces::

    data Peano = Z | S Peano;
    reflect add :: Peano -> Peano -> Peano;
    add Z m = m;
    add (S n) m = S (add n m);

Parsing happens in two phases.  The first builds declarations whose
expressions still mention constructors by name only; the second, once every
data declaration is known, saturates constructors, completes case
alternatives and turns pattern equations into one lambda/case tree.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable

from .core import (ARITY, BOOL, FALSE, INT, TRUE, UNIT, Alt, App, Base, BoolLit, Case, Const,
                   Ctor, CtorDecl, DataDecl, Definition, Expr, Fun, IntLit, Lam, MeasureDef,
                   Program, RefType, Shape, Span, TArrow, TData, TVar, UnitLit, Var, apps,
                   binop, conj, free_vars, substitute)


class ParseError(Exception):
    kind = "ParseError"

    def __init__(self, message: str, span: Span | None = None) -> None:
        super().__init__(message)
        self.span = span


class SyntaxError_(ParseError):
    kind = "SyntaxError"

    def __init__(self, span: Span, expected: Iterable[str], found: str) -> None:
        self.expected = tuple(sorted(set(expected)))
        super().__init__(f"expected {' or '.join(self.expected)}, found {found}", span)


class DuplicateName(ParseError):
    kind = "DuplicateName"


class UnknownConstructor(ParseError):
    kind = "UnknownConstructor"


class NonUniformArity(ParseError):
    kind = "NonUniformArity"


class OverlappingPatterns(ParseError):
    kind = "OverlappingPatterns"


class NonExhaustive(ParseError):
    kind = "NonExhaustive"


# -- lexer -----------------------------------------------------------------

KEYWORDS = {"data", "measure", "reflect", "let", "prop", "assume", "case", "of", "if", "then",
            "else", "in", "otherwise"}
_SYMBOL_CHARS = "=<>/&|+-*.?:\\!$%^~@#"
_PUNCT = "(){}[],;`"
_TOKEN = re.compile(r"""
    (?P<ws>\s+|--[^\n]*|\{-(?:.|\n)*?-\})
  | (?P<int>\d+)
  | (?P<uname>[A-Z][A-Za-z0-9_']*)
  | (?P<lname>[a-z_][A-Za-z0-9_']*)
  | (?P<punct>[(){}\[\],;`])
  | (?P<sym>[=<>/&|+\-*.?:\\!$%^~@\#]+)
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # int, uname, lname, kw, sym, punct, eof
    text: str
    span: Span

    def __str__(self) -> str:
        return "end of input" if self.kind == "eof" else repr(self.text)


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SyntaxError_(Span(pos, pos + 1), ["a token"], repr(text[pos]))
        kind = m.lastgroup
        if kind != "ws":
            word = m.group()
            if kind == "lname" and word in KEYWORDS:
                kind = "kw"
            out.append(Token(kind, word, Span(m.start(), m.end())))
        pos = m.end()
    out.append(Token("eof", "", Span(len(text), len(text))))
    return out


# -- operators ---------------------------------------------------------------

# Binary operators from loosest to tightest.  ``?`` and the equational
# steps share a level so a chain reads left to right.
_LEVELS: list[tuple[str, set[str]]] = [
    ("left", {"**"}),
    ("left", {"?", "=.", "==.", "/=.", "<=.", "<.", ">=.", ">.", "=*"}),
    ("right", {"||"}),
    ("right", {"&&"}),
    ("none", {"=", "==", "/=", "<", "<=", ">", ">="}),
    ("left", {">>="}),
    ("right", {"++"}),
    ("left", {"+", "-"}),
    ("left", {"*"}),
    ("right", {"."}),
]
STEPS = {"=.": "eqBecause", "==.": "eqBecause", "/=.": "neqBecause", "<=.": "leBecause",
         "<.": "ltBecause", ">=.": "geBecause", ">.": "gtBecause"}
_BUILTIN_OPS = {"=": "=", "==": "=", "<": "<", "<=": "<=", "&&": "&&", "||": "||", "+": "+",
                "-": "-", "*": "*"}
_OPERATOR_SECTIONS = {*_BUILTIN_OPS, "/=", ">", ">=", "++", ">>=", ".", "**", "?", "=*",
                      *STEPS}


def make_binop(op: str, l: Expr, r: Expr, span: Span | None = None) -> Expr:
    if op in ("=", "==", "<", "<=", "&&", "||", "+", "-", "*"):
        return App(App(Const(_BUILTIN_OPS[op], span=span), l, span), r, span)
    if op == "/=":
        return App(Const("not", span=span), make_binop("=", l, r, span), span)
    if op == ">":
        return make_binop("<", r, l, span)
    if op == ">=":
        return make_binop("<=", r, l, span)
    if op == "?":
        head, args = _unwind(l)
        if isinstance(head, _StepVar) and len(args) == 2:
            return apps(Var(STEPS[head.name], span=head.span), *args, r)
        return App(l, r, span)
    if op in STEPS:
        return App(App(_StepVar(op, span=span), l, span), r, span)
    return App(App(Var(op, span=span), l, span), r, span)


def _unwind(e: Expr) -> tuple[Expr, list[Expr]]:
    args = []
    while isinstance(e, App):
        args.append(e.arg)
        e = e.fn
    return e, args[::-1]


class _StepVar(Var):
    """An equational step written infix; ``?`` may turn it ternary."""


def _plain(e: Expr) -> Expr:
    return Var(e.name, e.inst, e.span) if isinstance(e, _StepVar) else e


# -- raw syntax --------------------------------------------------------------


@dataclass(frozen=True)
class Pat:
    kind: str  # var, wild, ctor, int, bool
    name: str = ""
    binders: tuple[str, ...] = ()
    value: int | bool | None = None
    span: Span | None = None


@dataclass(frozen=True)
class _RawCtor(Expr):
    name: str
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class _RawCase(Expr):
    scrut: Expr
    alts: tuple[tuple[Pat, Expr], ...]
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass
class Equation:
    pats: list[Pat]
    rhs: list[tuple[Expr | None, Expr]]  # guard (None: unconditional) and body
    span: Span


@dataclass
class _RawData:
    name: str
    tparams: list[str]
    ctors: list[tuple[str, list]]
    span: Span


@dataclass
class _RawDef:
    kind: str
    name: str
    type: object
    metric: list[Expr] | None
    eqs: list[Equation]
    span: Span


# Raw types keep data type names unresolved until every declaration is known.
@dataclass(frozen=True)
class _RT:
    kind: str  # base, fun
    shape: object = None
    var: str = "v"
    refinement: Expr = TRUE
    param: str = ""
    dom: object = None
    cod: object = None


# -- parser ------------------------------------------------------------------


class Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.counter = 0

    # token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, kind: str | None = None) -> bool:
        t = self.tok
        return t.text == text and t.kind in ((kind,) if kind else ("kw", "sym", "punct"))

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise SyntaxError_(self.tok.span, [repr(text)], str(self.tok))
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            raise SyntaxError_(self.tok.span, [what], str(self.tok))
        return self.advance()

    def fresh(self, stem: str) -> str:
        self.counter += 1
        return f"_{stem}{self.counter}"

    def span_from(self, start: Span) -> Span:
        return Span(start.start, self.toks[self.i - 1].span.end)

    # declarations --------------------------------------------------------

    def declarations(self) -> list:
        out = []
        while self.tok.kind != "eof":
            out.append(self.declaration())
        return out

    def declaration(self):
        t = self.tok
        if t.kind == "kw" and t.text == "data":
            return self.data_decl()
        if t.kind == "kw" and t.text in ("measure", "reflect", "let", "prop", "assume"):
            return self.definition()
        raise SyntaxError_(t.span, ["'data'", "'measure'", "'reflect'", "'let'", "'prop'",
                                    "'assume'"], str(t))

    def data_decl(self) -> _RawData:
        start = self.advance().span
        name = self.expect_kind("uname", "a type name").text
        tparams = []
        while self.tok.kind == "lname":
            tparams.append(self.advance().text)
        self.expect("=")
        ctors = [self.ctor_decl()]
        while self.at("|"):
            self.advance()
            ctors.append(self.ctor_decl())
        self.expect(";")
        return _RawData(name, tparams, ctors, self.span_from(start))

    def ctor_decl(self) -> tuple[str, list]:
        name = self.expect_kind("uname", "a constructor name").text
        fields = []
        while self.tok.kind in ("uname", "lname") or self.at("("):
            fields.append(self.shape_atom())
        return name, fields

    def definer(self) -> str:
        """A definition's name: an identifier or a parenthesised operator."""
        if self.tok.kind == "lname":
            return self.advance().text
        if self.at("(") and self.peek().kind == "sym" and self.peek(2).text == ")":
            self.advance()
            op = self.advance().text
            self.advance()
            return op
        raise SyntaxError_(self.tok.span, ["a name"], str(self.tok))

    def at_definer(self, name: str) -> bool:
        if self.tok.kind == "lname":
            return self.tok.text == name
        return (self.at("(") and self.peek().kind == "sym" and self.peek().text == name
                and self.peek(2).text == ")")

    def definition(self) -> _RawDef:
        start = self.tok.span
        kind = self.advance().text
        name = self.definer()
        self.expect("::")
        ty = self.type_()
        metric = None
        if self.at("/"):
            self.advance()
            self.expect("[")
            metric = [self.expr()]
            while self.at(","):
                self.advance()
                metric.append(self.expr())
            self.expect("]")
        self.expect(";")
        eqs = []
        while self.at_definer(name):
            eqs.append(self.equation(name))
        if kind != "assume" and not eqs:
            raise SyntaxError_(self.tok.span, [f"an equation for {name}"], str(self.tok))
        if kind == "assume" and eqs:
            raise SyntaxError_(eqs[0].span, ["no equations for an assumed name"], "an equation")
        return _RawDef(kind, name, ty, metric, eqs, self.span_from(start))

    def equation(self, name: str) -> Equation:
        start = self.tok.span
        self.definer()
        pats = []
        while not (self.at("=") or self.at("|")):
            pats.append(self.pattern())
        rhs: list[tuple[Expr | None, Expr]] = []
        if self.at("="):
            self.advance()
            rhs.append((None, self.expr()))
        else:
            while self.at("|"):
                self.advance()
                if self.at("otherwise", "kw"):
                    self.advance()
                    guard = None
                else:
                    guard = self.expr(guard=True)
                self.expect("=")
                rhs.append((guard, self.expr()))
        self.expect(";")
        return Equation(pats, rhs, self.span_from(start))

    def pattern(self) -> Pat:
        t = self.tok
        if t.kind == "lname":
            self.advance()
            return Pat("wild" if t.text == "_" else "var", t.text, span=t.span)
        if t.kind == "int":
            self.advance()
            return Pat("int", value=int(t.text), span=t.span)
        if t.kind == "uname":
            self.advance()
            if t.text in ("True", "False"):
                return Pat("bool", value=t.text == "True", span=t.span)
            return Pat("ctor", t.text, (), span=t.span)
        if self.at("("):
            self.advance()
            if self.at("-") and self.peek().kind == "int":
                self.advance()
                n = -int(self.advance().text)
                self.expect(")")
                return Pat("int", value=n, span=self.span_from(t.span))
            c = self.expect_kind("uname", "a constructor pattern")
            binders = []
            while self.tok.kind == "lname":
                b = self.advance().text
                binders.append(self.fresh("w") if b == "_" else b)
            self._no_nesting()
            self.expect(")")
            if c.text in ("True", "False") and not binders:
                return Pat("bool", value=c.text == "True", span=c.span)
            return Pat("ctor", c.text, tuple(binders), span=self.span_from(t.span))
        raise SyntaxError_(t.span, ["a pattern"], str(t))

    # types -----------------------------------------------------------------

    def type_(self) -> _RT:
        start = self.i
        if self.tok.kind == "lname" and self.peek().text == ":" and self.peek().kind == "sym":
            param = self.advance().text
            self.advance()
            dom = self.type_app()
            self.expect("->")
            return _RT("fun", param=param, dom=dom, cod=self.type_())
        dom = self.type_app()
        if self.at("->"):
            self.advance()
            return _RT("fun", param=self.fresh("p"), dom=dom, cod=self.type_())
        return dom

    def type_app(self) -> _RT:
        """An unrefined base type with arguments, or any type atom."""
        if self.tok.kind == "uname" and self.tok.text not in _ALIASES:
            name = self.advance().text
            args = []
            while self.tok.kind in ("uname", "lname") or self.at("("):
                args.append(self.shape_atom())
            return _RT("base", shape=("data", name, args))
        return self.type_atom()

    def type_atom(self) -> _RT:
        t = self.tok
        if self.at("{"):
            self.advance()
            if self.tok.kind == "lname" and self.peek().text == ":":
                var = self.advance().text
                self.advance()
                base = _RT("base", shape=self.shape_app_arrow())
                self.expect("|")
                r = self.expr()
                self.expect("}")
                return _RT("base", shape=base.shape, var=var,
                           refinement=_conj_raw(_alias_refinement(base, var), r))
            r = self.expr()
            self.expect("}")
            return _RT("base", shape=("unit",), var=self.fresh("v"), refinement=r)
        if self.at("("):
            self.advance()
            inner = self.type_()
            self.expect(")")
            return inner
        if t.kind == "uname":
            self.advance()
            if t.text in _ALIASES:
                return _RT("base", shape=("alias", t.text))
            return _RT("base", shape=("data", t.text, []))
        if t.kind == "lname":
            self.advance()
            return _RT("base", shape=("tvar", t.text))
        raise SyntaxError_(t.span, ["a type"], str(t))

    def shape_atom(self):
        t = self.tok
        if t.kind == "lname":
            self.advance()
            return ("tvar", t.text)
        if t.kind == "uname":
            self.advance()
            if t.text in _ALIASES:
                return ("alias", t.text)
            return ("data", t.text, [])
        if self.at("("):
            self.advance()
            first = self.shape_app()
            if self.at("->"):
                self.advance()
                rest = self.shape_app_arrow()
                self.expect(")")
                return ("arrow", first, rest)
            self.expect(")")
            return first
        raise SyntaxError_(t.span, ["a type"], str(t))

    def shape_app(self):
        if self.tok.kind == "uname" and self.tok.text not in _ALIASES:
            name = self.advance().text
            args = []
            while self.tok.kind in ("uname", "lname") or self.at("("):
                args.append(self.shape_atom())
            return ("data", name, args)
        return self.shape_atom()

    def shape_app_arrow(self):
        first = self.shape_app()
        if self.at("->"):
            self.advance()
            return ("arrow", first, self.shape_app_arrow())
        return first

    # expressions -----------------------------------------------------------

    def expr(self, guard: bool = False) -> Expr:
        return self.binary(0, guard)

    def binary(self, level: int, guard: bool) -> Expr:
        if level == len(_LEVELS):
            return self.application()
        assoc, ops = _LEVELS[level]
        start = self.tok.span
        left = self.binary(level + 1, guard)
        while self.tok.kind == "sym" and self.tok.text in ops and not (guard and self.tok.text == "="):
            op = self.advance().text
            if assoc == "right":
                right = self.binary(level, guard)
            else:
                right = self.binary(level + 1, guard)
            left = make_binop(op, left, right, self.span_from(start))
            if assoc == "none":
                break
        return left

    def application(self) -> Expr:
        start = self.tok.span
        if self.at("\\"):
            return self.lambda_()
        if self.at("case", "kw"):
            return self.case_()
        if self.at("if", "kw"):
            return self.if_()
        if self.at("let", "kw"):
            return self.let_()
        head = self.atom()
        while self.starts_atom():
            head = App(head, self.atom(), self.span_from(start))
        if self.at("\\") or self.at("case", "kw") or self.at("if", "kw"):
            # a trailing lambda or case is the last argument
            head = App(head, self.application(), self.span_from(start))
        return head

    def starts_atom(self) -> bool:
        t = self.tok
        return t.kind in ("int", "uname", "lname") or self.at("(") or self.at("[")

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return IntLit(int(t.text), t.span)
        if self.at("-") and self.peek().kind == "int":
            # only reached where an operand starts, so `x - 1` is unaffected
            self.advance()
            n = self.advance()
            return IntLit(-int(n.text), self.span_from(t.span))
        if t.kind == "lname":
            self.advance()
            if t.text == "not":
                return Const("not", span=t.span)
            return Var(t.text, span=t.span)
        if t.kind == "uname":
            self.advance()
            if t.text in ("True", "False"):
                return BoolLit(t.text == "True", t.span)
            return _RawCtor(t.text, t.span)
        if self.at("["):
            return self.list_literal()
        if self.at("("):
            self.advance()
            if self.at(")"):
                self.advance()
                return UnitLit(self.span_from(t.span))
            if self.tok.kind == "sym" and self.peek().text == ")":
                op = self.advance().text
                self.advance()
                return self.section(op, self.span_from(t.span))
            if self.at("-") and self.peek().kind == "int" and self.peek(2).text == ")":
                self.advance()
                n = -int(self.advance().text)
                self.advance()
                return IntLit(n, self.span_from(t.span))
            if self.at("-"):
                self.advance()
                inner = self.expr()
                self.expect(")")
                return make_binop("-", IntLit(0), inner, self.span_from(t.span))
            inner = self.expr()
            self.expect(")")
            return inner
        raise SyntaxError_(t.span, ["an expression"], str(t))

    def section(self, op: str, span: Span) -> Expr:
        if op in ("=", "==", "<", "<=", "&&", "||", "+", "-", "*"):
            return Const(_BUILTIN_OPS[op], span=span)
        if op in ("/=", ">", ">=", "?"):
            x, y = self.fresh("l"), self.fresh("r")
            return Lam(x, Lam(y, make_binop(op, Var(x), Var(y), span), span=span), span=span)
        if op in STEPS or op in _OPERATOR_SECTIONS or op not in KEYWORDS:
            return Var(op, span=span)
        raise SyntaxError_(span, ["an operator"], op)

    def list_literal(self) -> Expr:
        start = self.advance().span
        items = []
        if not self.at("]"):
            items.append(self.expr())
            while self.at(","):
                self.advance()
                items.append(self.expr())
        self.expect("]")
        span = self.span_from(start)
        out: Expr = _RawCtor("Nil", span)
        for it in reversed(items):
            out = App(App(_RawCtor("Cons", span), it, span), out, span)
        return out

    def lambda_(self) -> Expr:
        start = self.advance().span
        names = []
        while self.tok.kind == "lname":
            names.append(self.advance().text)
        if not names:
            raise SyntaxError_(self.tok.span, ["a lambda binder"], str(self.tok))
        self.expect("->")
        body = self.expr()
        span = self.span_from(start)
        for n in reversed(names):
            body = Lam(n, body, span=span)
        return body

    def case_(self) -> Expr:
        start = self.advance().span
        scrut = self.expr()
        self.expect("of")
        self.expect("{")
        alts = []
        while True:
            p = self.case_pattern()
            self.expect("->")
            alts.append((p, self.expr()))
            if self.at(";"):
                self.advance()
                if self.at("}"):
                    break
                continue
            break
        self.expect("}")
        return _RawCase(scrut, tuple(alts), self.span_from(start))

    def case_pattern(self) -> Pat:
        """Like an equation pattern, but ``C x y`` needs no parentheses."""
        t = self.tok
        if t.kind != "uname" or t.text in ("True", "False"):
            return self.pattern()
        self.advance()
        binders = []
        while self.tok.kind == "lname":
            b = self.advance().text
            binders.append(self.fresh("w") if b == "_" else b)
        self._no_nesting()
        return Pat("ctor", t.text, tuple(binders), span=self.span_from(t.span))

    def _no_nesting(self) -> None:
        if self.at("(") or self.tok.kind in ("uname", "int"):
            raise SyntaxError_(self.tok.span, ["a variable (patterns are one level deep)"],
                               str(self.tok))

    def if_(self) -> Expr:
        start = self.advance().span
        c = self.expr()
        self.expect("then")
        t = self.expr()
        self.expect("else")
        e = self.expr()
        span = self.span_from(start)
        return _RawCase(c, ((Pat("bool", value=True), t), (Pat("bool", value=False), e)), span)

    def let_(self) -> Expr:
        start = self.advance().span
        name = self.expect_kind("lname", "a let binder").text
        params = []
        while self.tok.kind == "lname":
            params.append(self.advance().text)
        self.expect("=")
        rhs = self.expr()
        self.expect("in")
        body = self.expr()
        for p in reversed(params):
            rhs = Lam(p, rhs)
        if name in free_vars_raw(rhs):
            raise SyntaxError_(start, ["a non-recursive let"], f"recursive binding {name}")
        span = self.span_from(start)
        return App(Lam(name, body, span=span), rhs, span)


def free_vars_raw(e: Expr) -> set[str]:
    match e:
        case Var(n):
            return {n}
        case Lam(x, b):
            return free_vars_raw(b) - {x}
        case App(f, a):
            return free_vars_raw(f) | free_vars_raw(a)
        case _RawCase(s, alts):
            out = free_vars_raw(s)
            for p, b in alts:
                out |= free_vars_raw(b) - {p.name, *p.binders}
            return out
    return set()


_ALIASES = {"Int", "Bool", "Unit", "Prop", "Nat"}


def _alias_refinement(t: _RT, var: str) -> Expr:
    if t.shape == ("alias", "Nat"):
        return make_binop("<=", IntLit(0), Var(var))
    return TRUE


def _conj_raw(a: Expr, b: Expr) -> Expr:
    if a == TRUE:
        return b
    return make_binop("&&", a, b)


# -- elaboration ---------------------------------------------------------------


class Elaborator:
    """Resolves constructors and desugars equations against known data types."""

    def __init__(self, datas: list[DataDecl]) -> None:
        self.datas: dict[str, DataDecl] = {}
        self.ctors: dict[str, tuple[DataDecl, CtorDecl]] = {}
        self.counter = 0
        for d in datas:
            self.add_data(d)

    def fresh(self, stem: str) -> str:
        self.counter += 1
        return f"_{stem}{self.counter}"

    def add_data(self, d: DataDecl) -> None:
        if d.name in self.datas or d.name in _ALIASES:
            raise DuplicateName(f"data type {d.name} is declared twice", d.span)
        self.datas[d.name] = d
        for c in d.ctors:
            if c.name in self.ctors or c.name in ("True", "False"):
                raise DuplicateName(f"constructor {c.name} is declared twice", d.span)
            self.ctors[c.name] = (d, c)

    # shapes and types ------------------------------------------------------

    def shape(self, raw, span: Span | None, tparams: set[str] | None = None) -> Shape:
        kind = raw[0]
        if kind == "tvar":
            if tparams is not None and raw[1] not in tparams:
                raise ParseError(f"type variable {raw[1]} is not a parameter", span)
            return TVar(raw[1])
        if kind == "alias":
            return {"Int": INT, "Nat": INT, "Bool": BOOL, "Unit": UNIT, "Prop": UNIT}[raw[1]]
        if kind == "unit":
            return UNIT
        if kind == "arrow":
            return TArrow(self.shape(raw[1], span, tparams), self.shape(raw[2], span, tparams))
        _, name, args = raw
        if name not in self.datas:
            raise ParseError(f"unknown type {name}", span)
        d = self.datas[name]
        if len(args) != len(d.tparams):
            raise ParseError(f"{name} expects {len(d.tparams)} type arguments", span)
        return TData(name, tuple(self.shape(a, span, tparams) for a in args))

    def type(self, raw: _RT, span: Span | None) -> RefType:
        if raw.kind == "fun":
            return Fun(raw.param, self.type(raw.dom, span), self.type(raw.cod, span))
        r = _alias_refinement(raw, raw.var) if raw.refinement == TRUE else raw.refinement
        return Base(raw.var, self.shape(raw.shape, span), self.expr(r))

    # expressions -----------------------------------------------------------

    def expr(self, e: Expr) -> Expr:
        match e:
            case App():
                head, args = _unwind(e)
                args = [self.expr(a) for a in args]
                if isinstance(head, _RawCtor):
                    return self.ctor(head, args, e.span)
                return apps_span(self.expr(head), args, e.span)
            case _RawCtor():
                return self.ctor(e, [], e.span)
            case _StepVar():
                return _plain(e)
            case Lam(x, b):
                return Lam(x, self.expr(b), e.ann, e.span)
            case _RawCase(s, alts):
                return self.case(self.expr(s), list(alts), e.span)
        return e

    def ctor(self, head: _RawCtor, args: list[Expr], span) -> Expr:
        if head.name not in self.ctors:
            raise UnknownConstructor(f"unknown constructor {head.name}", head.span)
        _, c = self.ctors[head.name]
        k = len(c.fields)
        if len(args) >= k:
            return apps_span(Ctor(head.name, tuple(args[:k]), span=span), args[k:], span)
        extra = [self.fresh("c") for _ in range(k - len(args))]
        out: Expr = Ctor(head.name, tuple(args) + tuple(Var(x) for x in extra), span=span)
        for x in reversed(extra):
            out = Lam(x, out, span=span)
        return out

    def case(self, scrut: Expr, alts: list[tuple[Pat, Expr]], span) -> Expr:
        binder = self.fresh("s")
        if all(p.kind in ("bool", "var", "wild") for p, _ in alts) and \
                any(p.kind == "bool" for p, _ in alts):
            names = ["True", "False"]
            fields = {"True": 0, "False": 0}
        else:
            first = next((p for p, _ in alts if p.kind == "ctor"), None)
            if first is None:
                # only variable alternatives: a plain binding
                p, body = alts[0]
                if len(alts) > 1:
                    raise OverlappingPatterns("unreachable case alternative", span)
                body = self.expr(body)
                if p.kind == "var":
                    return App(Lam(p.name, body, span=span), scrut, span)
                return body
            if first.name not in self.ctors:
                raise UnknownConstructor(f"unknown constructor {first.name}", first.span)
            d, _ = self.ctors[first.name]
            names = [c.name for c in d.ctors]
            fields = {c.name: len(c.fields) for c in d.ctors}
        out: dict[str, Alt] = {}
        default = None
        for p, body in alts:
            if p.kind in ("var", "wild"):
                if default is not None or len(out) == len(names):
                    raise OverlappingPatterns("unreachable case alternative", p.span)
                default = (p, body)
                continue
            tag = p.name if p.kind == "ctor" else ("True" if p.value else "False")
            if p.kind not in ("ctor", "bool") or tag not in fields:
                raise UnknownConstructor(f"{tag} is not a constructor of the scrutinee", p.span)
            if tag in out or default is not None:
                raise OverlappingPatterns(f"unreachable alternative for {tag}", p.span)
            if len(p.binders) != fields[tag]:
                raise ParseError(f"{tag} takes {fields[tag]} fields", p.span)
            out[tag] = Alt(tag, p.binders, self.expr(body))
        for tag in names:
            if tag in out:
                continue
            if default is None:
                raise NonExhaustive(f"missing alternative for {tag}", span)
            p, body = default
            b = self.expr(body)
            if p.kind == "var":
                b = substitute(b, p.name, Var(binder))
            out[tag] = Alt(tag, tuple(self.fresh("w") for _ in range(fields[tag])), b)
        return Case(binder, scrut, tuple(out[t] for t in names), span=span)

    # equations -------------------------------------------------------------

    def equations(self, name: str, eqs: list[Equation], span: Span) -> Expr:
        arity = {len(q.pats) for q in eqs}
        if len(arity) != 1:
            raise NonUniformArity(f"equations for {name} have different numbers of arguments",
                                  span)
        n = arity.pop()
        positions = sorted({i for q in eqs for i, p in enumerate(q.pats) if p.kind == "ctor"})
        if len(positions) > 1:
            raise ParseError(f"{name} matches constructors in more than one argument", span)
        params = []
        for i in range(n):
            named = [q.pats[i].name for q in eqs if q.pats[i].kind == "var"]
            candidate = named[0] if named and all(x == named[0] for x in named) else None
            params.append(candidate or self.fresh("a"))
        clauses = []
        for q in eqs:
            sub = {}
            guards: list[Expr] = []
            for i, p in enumerate(q.pats):
                if p.kind == "var" and p.name != params[i]:
                    sub[p.name] = Var(params[i])
                elif p.kind == "int":
                    guards.append(make_binop("=", Var(params[i]), IntLit(p.value)))
                elif p.kind == "bool":
                    guards.append(Var(params[i]) if p.value else
                                  App(Const("not"), Var(params[i])))
            rhs = []
            for g, b in q.rhs:
                g2 = conj(tuple(guards) + ((self.expr(g),) if g is not None else ()))
                rhs.append((None if g2 == TRUE else g2, self.expr(b)))
            ctor_pat = q.pats[positions[0]] if positions else None
            clauses.append((ctor_pat, rhs, sub, q.span))
        if positions:
            body = self.ctor_split(params[positions[0]], clauses, span)
        else:
            used: set[int] = set()
            body = self.guard_chain(list(enumerate(clauses)), used, span)
            self.check_used(clauses, used)
        for x in reversed(params):
            body = Lam(x, body, span=span)
        return body

    def guard_chain(self, clauses, used: set[int], span, extra_sub=None) -> Expr:
        """First matching guard wins; falls through to later clauses."""
        branches: list[tuple[Expr | None, Expr]] = []
        for k, (_, rhs, sub, _) in clauses:
            for g, b in rhs:
                s = dict(sub)
                s.update(extra_sub(k) if extra_sub else {})
                g = None if g is None else _subst_all(g, s)
                branches.append((g, _subst_all(b, s)))
                used.add(k)
                if g is None:
                    break
            if branches and branches[-1][0] is None:
                break
        if not branches or branches[-1][0] is not None:
            raise NonExhaustive("guards may all fail; end with 'otherwise'", span)
        out = branches[-1][1]
        for g, b in reversed(branches[:-1]):
            out = Case(self.fresh("g"), g, (Alt("True", (), b), Alt("False", (), out)),
                       span=span)
        return out

    def ctor_split(self, param: str, clauses, span) -> Expr:
        first = next(p for p, _, _, _ in clauses if p is not None and p.kind == "ctor")
        if first.name not in self.ctors:
            raise UnknownConstructor(f"unknown constructor {first.name}", first.span)
        d, _ = self.ctors[first.name]
        binder = self.fresh("s")
        used: set[int] = set()
        alts = []
        for c in d.ctors:
            mine = [(k, cl) for k, cl in enumerate(clauses)
                    if cl[0].kind != "ctor" or cl[0].name == c.name]
            named = next((cl[0] for _, cl in mine if cl[0].kind == "ctor"), None)
            binders = tuple(named.binders) if named else tuple(self.fresh("w") for _ in c.fields)

            def extra(k, binders=binders, c=c):
                p = clauses[k][0]
                if p.kind == "ctor":
                    return {b: Var(x) for b, x in zip(p.binders, binders) if b != x}
                if p.kind == "var" and p.name != param:
                    return {p.name: Var(param)}
                return {}

            for _, cl in mine:
                p = cl[0]
                if p.kind == "ctor" and len(p.binders) != len(c.fields):
                    raise ParseError(f"{c.name} takes {len(c.fields)} fields", p.span)
                if p.kind == "ctor" and p.name not in [x.name for x in d.ctors]:
                    raise UnknownConstructor(f"{p.name} is not a constructor of {d.name}",
                                             p.span)
            if not mine:
                raise NonExhaustive(f"no equation covers {c.name}", span)
            alts.append(Alt(c.name, binders, self.guard_chain(mine, used, span, extra)))
        for _, cl in enumerate(clauses):
            p = cl[0]
            if p.kind == "ctor" and p.name not in self.ctors:
                raise UnknownConstructor(f"unknown constructor {p.name}", p.span)
            if p.kind == "ctor" and self.ctors[p.name][0] is not d:
                raise UnknownConstructor(f"{p.name} is not a constructor of {d.name}", p.span)
        self.check_used(clauses, used)
        return Case(binder, Var(param), tuple(alts), span=span)

    def check_used(self, clauses, used: set[int]) -> None:
        for k, cl in enumerate(clauses):
            if k not in used:
                raise OverlappingPatterns("equation can never match", cl[3])


def _subst_all(e: Expr, sub: dict[str, Expr]) -> Expr:
    from .core import subst_many
    return subst_many(e, sub)


def apps_span(fn: Expr, args: list[Expr], span) -> Expr:
    for a in args:
        fn = App(fn, a, span)
    return fn


# -- programs --------------------------------------------------------------------


def parse_program(text: str, base: Program | None = None) -> Program:
    """Parse ``text``; constructors of ``base`` (default: the prelude) are in scope.

    Only the declarations of ``text`` itself are returned.
    """
    if base is None:
        base = load_prelude()
    return _elaborate(Parser(text).declarations(), base, text)


def _elaborate(decls: list, base: Program, text: str) -> Program:
    el = Elaborator(base.datas)
    prog = Program()
    taken = {d.name for d in base.defs} | {m.name for m in base.measures}
    for raw in decls:
        if isinstance(raw, _RawData):
            d = DataDecl(raw.name, tuple(raw.tparams), (), raw.span)
            el_tmp = raw
            if raw.name in el.datas:
                raise DuplicateName(f"data type {raw.name} is declared twice", raw.span)
            el.datas[raw.name] = d  # allow recursive occurrences in the fields
            ctors = tuple(CtorDecl(n, tuple(el.shape(f, raw.span, set(raw.tparams))
                                            for f in fs)) for n, fs in el_tmp.ctors)
            del el.datas[raw.name]
            d = DataDecl(raw.name, tuple(raw.tparams), ctors, raw.span)
            el.add_data(d)
            prog.datas.append(d)
    for raw in decls:
        if isinstance(raw, _RawData):
            continue
        if raw.name in taken:
            raise DuplicateName(f"{raw.name} is defined twice", raw.span)
        taken.add(raw.name)
        ty = el.type(raw.type, raw.span)
        source = text[raw.span.start:raw.span.end]
        if raw.kind == "measure":
            prog.measures.append(_measure(el, raw, ty))
            continue
        body = None if raw.kind == "assume" else el.equations(raw.name, raw.eqs, raw.span)
        metric = None if raw.metric is None else tuple(el.expr(m) for m in raw.metric)
        prog.defs.append(Definition(raw.kind, raw.name, ty, body, metric, raw.span, source))
    return prog


def _measure(el: Elaborator, raw: _RawDef, ty: RefType) -> MeasureDef:
    if not isinstance(ty, Fun) or not isinstance(ty.dom, Base) or \
            not isinstance(ty.dom.base, TData) or not isinstance(ty.cod, Base):
        raise ParseError(f"measure {raw.name} must map a data type to a base type", raw.span)
    d = el.datas[ty.dom.base.name]
    body = el.equations(raw.name, raw.eqs, raw.span)
    if not (isinstance(body, Lam) and isinstance(body.body, Case)
            and body.body.scrut == Var(body.param)):
        raise ParseError(f"measure {raw.name} must have one equation per constructor",
                         raw.span)
    case = body.body
    alts = []
    for a in case.alts:
        b = a.body
        if body.param in free_vars(b) or case.binder in free_vars(b):
            raise ParseError(f"measure {raw.name} may only use the constructor fields",
                             raw.span)
        alts.append(Alt(a.ctor, a.binders, b))
    if [a.ctor for a in alts] != [c.name for c in d.ctors]:
        raise ParseError(f"measure {raw.name} must cover every constructor", raw.span)
    return MeasureDef(raw.name, ty, tuple(alts), raw.span)


_PRELUDE: Program | None = None


def prelude_text() -> str:
    return resources.files("lamr").joinpath("prelude.rfl").read_text()


def load_prelude() -> Program:
    global _PRELUDE
    if _PRELUDE is None:
        _PRELUDE = _elaborate(Parser(prelude_text()).declarations(), Program(), prelude_text())
    return _PRELUDE


def desugar_equations(name: str, eqs: list[Equation], datas: list[DataDecl] | None = None,
                      span: Span | None = None) -> Expr:
    """Turn pattern equations into one lambda/case expression."""
    if datas is None:
        datas = load_prelude().datas
    return Elaborator(datas).equations(name, eqs, span or Span(0, 0))


def parse_equations(text: str, datas: list[DataDecl] | None = None) -> Expr:
    """Desugar the equations in ``text``, all for the same name, into a term."""
    p = Parser(text)
    name = p.tok.text
    if p.at("("):
        name = p.peek().text
    eqs = []
    while p.tok.kind != "eof":
        eqs.append(p.equation(name))
    return desugar_equations(name, eqs, datas)


def parse_expr(text: str, datas: list[DataDecl] | None = None) -> Expr:
    p = Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        raise SyntaxError_(p.tok.span, ["end of input"], str(p.tok))
    return Elaborator(load_prelude().datas if datas is None else datas).expr(e)


def parse_type(text: str, datas: list[DataDecl] | None = None) -> RefType:
    p = Parser(text)
    t = p.type_()
    if p.tok.kind != "eof":
        raise SyntaxError_(p.tok.span, ["end of input"], str(p.tok))
    return Elaborator(load_prelude().datas if datas is None else datas).type(t, None)
