"""Read small S-expressions into predicates, for hand-written solver cases.

Symbols must be declared in ``sig``: a variable maps to its Sort, a function
symbol to a tuple ``(arg sorts..., result sort)``.
"""
from __future__ import annotations

import re

from lamr.pred import S_BOOL, S_INT, S_UNIV, PApp, PBin, PBool, PInt, PIte, PNot, PVar, Pred
from lamr.smt.solver import Invalid, Unknown, Valid, check_sat

I, B, U = S_INT, S_BOOL, S_UNIV


class _Reader:
    def __init__(self, text: str, sig: dict) -> None:
        self.toks = re.findall(r"\(|\)|[^\s()]+", text)
        self.pos = 0
        self.sig = sig

    def read(self) -> Pred:
        t = self.toks[self.pos]
        self.pos += 1
        if t != "(":
            return self.atom(t)
        head = self.toks[self.pos]
        self.pos += 1
        args = []
        while self.toks[self.pos] != ")":
            args.append(self.read())
        self.pos += 1
        return self.node(head, args)

    def atom(self, t: str) -> Pred:
        if re.fullmatch(r"-?\d+", t):
            return PInt(int(t))
        if t in ("true", "false"):
            return PBool(t == "true")
        s = self.sig[t]
        if isinstance(s, tuple):
            return PApp(t, (), s[-1])
        return PVar(t, s)

    def node(self, head: str, args: list[Pred]) -> Pred:
        if head == "not":
            return PNot(args[0])
        if head == "ite":
            return PIte(*args)
        if head in ("and", "or"):
            op = "&&" if head == "and" else "||"
            out = args[0]
            for a in args[1:]:
                out = PBin(op, out, a)
            return out
        if head == "=>":
            return PBin("=>", args[0], args[1])
        if head == "distinct":
            return PNot(PBin("=", args[0], args[1]))
        if head in (">", ">="):
            return PBin("<" if head == ">" else "<=", args[1], args[0])
        if head in ("=", "<", "<=", "+", "*"):
            out = PBin(head, args[0], args[1])
            for a in args[2:]:
                out = PBin(head, out, a)
            return out
        if head == "-":
            if len(args) == 1:
                return PBin("-", PInt(0), args[0])
            return PBin("-", args[0], args[1])
        return PApp(head, tuple(args), self.sig[head][-1])


def parse(text: str, sig: dict | None = None) -> Pred:
    r = _Reader(text, sig or {})
    out = r.read()
    assert r.pos == len(r.toks), text
    return out


def verdict(text: str, sig: dict | None = None) -> str:
    """``valid``, ``invalid`` or ``unknown`` for the formula ``text``."""
    r = check_sat([PNot(parse(text, sig))])
    if isinstance(r, Valid):
        return "valid"
    if isinstance(r, Invalid):
        return "invalid"
    assert isinstance(r, Unknown)
    return "unknown"
