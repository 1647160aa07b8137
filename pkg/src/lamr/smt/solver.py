"""Validity checking for QF-UFLIA verification conditions.

The negated query is Tseitin-encoded into clauses over theory atoms and
decided by a small CDCL loop.  The theory side rebuilds a congruence
closure and a simplex tableau from the current assignment, trades
entailed equalities between them, and explains every conflict by the
literals that produced it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable

from ..pred import (PTRUE, S_BOOL, S_INT, PApp, PBin, PBool, PInt, PIte, PNot, PVar, Pred,
                    Sort, conjuncts, psubst, pvars, simplify, sort_of)
from .euf import EGraph
from .lia import Constraint, LiaSolver

BRANCH_BUDGET = 10_000


@dataclass(frozen=True)
class Valid:
    pass


@dataclass(frozen=True)
class Invalid:
    model: dict


@dataclass(frozen=True)
class Unknown:
    reason: str


class Nonlinear(Exception):
    pass


class Budget(Exception):
    pass


# -- linear forms --------------------------------------------------------------


@dataclass(frozen=True)
class Lin:
    coeffs: tuple[tuple[Hashable, int], ...]
    const: int

    @staticmethod
    def of(d: dict, c: int) -> Lin:
        return Lin(tuple(sorted(((k, v) for k, v in d.items() if v), key=repr)), c)

    def add(self, other: Lin, scale: int = 1) -> Lin:
        d = dict(self.coeffs)
        for k, v in other.coeffs:
            d[k] = d.get(k, 0) + scale * v
        return Lin.of(d, self.const + scale * other.const)

    def scale(self, k: int) -> Lin:
        return Lin.of({x: k * v for x, v in self.coeffs}, k * self.const)

    def key(self) -> Hashable:
        if not self.coeffs:
            return ("num", self.const)
        if self.const == 0 and len(self.coeffs) == 1 and self.coeffs[0][1] == 1:
            return self.coeffs[0][0]
        return ("lin", self.coeffs, self.const)

    def eval(self, vals: dict) -> int:
        return self.const + sum(v * vals[k] for k, v in self.coeffs)


# -- encoding ----------------------------------------------------------------


TRUE_KEY, FALSE_KEY = ("true",), ("false",)


class Encoder:
    """Clauses over boolean variables; theory atoms remember their meaning."""

    def __init__(self) -> None:
        self.nvars = 0
        self.meaning: list[tuple | None] = []
        self.atom_var: dict[tuple, int] = {}
        self.clauses: list[list[int]] = []
        self.terms: dict[Hashable, Sort] = {}  # every term key with its sort
        self.args_of: dict[Hashable, tuple] = {}
        self.int_form: dict[Hashable, Lin] = {}
        self.fresh_count = 0
        self.memo_f: dict[Pred, int] = {}
        self.memo_t: dict[Pred, Hashable] = {}
        self.true = self.new_var()
        self.clauses.append([self.true])

    def new_var(self, meaning: tuple | None = None) -> int:
        self.nvars += 1
        self.meaning.append(meaning)
        return self.nvars

    def atom(self, meaning: tuple) -> int:
        v = self.atom_var.get(meaning)
        if v is None:
            v = self.atom_var[meaning] = self.new_var(meaning)
        return v

    def const(self, b: bool) -> int:
        return self.true if b else -self.true

    # -- terms ---------------------------------------------------------------

    def register(self, key: Hashable, sort: Sort, args: tuple = ()) -> Hashable:
        if key not in self.terms:
            self.terms[key] = sort
            self.args_of[key] = args
        return key

    def lin(self, p: Pred) -> Lin:
        match p:
            case PInt(n):
                return Lin((), n)
            case PBin("+", l, r):
                return self.lin(l).add(self.lin(r))
            case PBin("-", l, r):
                return self.lin(l).add(self.lin(r), -1)
            case PBin("*", l, r):
                a, b = self.lin(l), self.lin(r)
                if not a.coeffs:
                    return b.scale(a.const)
                if not b.coeffs:
                    return a.scale(b.const)
                raise Nonlinear()
        k = self.term(p)
        return Lin(((k, 1),), 0)

    def int_key(self, p: Pred) -> Hashable:
        form = self.lin(p)
        key = form.key()
        if key not in self.terms:
            self.register(key, S_INT)
        self.int_form.setdefault(key, form)
        for k, _ in form.coeffs:
            self.int_form.setdefault(k, Lin(((k, 1),), 0))
        return key

    def term(self, p: Pred) -> Hashable:
        """The key of a non-arithmetic term (Int atoms included)."""
        if p in self.memo_t:
            return self.memo_t[p]
        s = sort_of(p)
        match p:
            case PVar(n, s):
                key = self.register(("var", n, s), s)
            case PApp(f, args, s):
                ks = tuple(self.arg_key(a) for a in args)
                key = self.register(("app", f, ks), s, ks)
            case PBool(b):
                key = TRUE_KEY if b else FALSE_KEY
                self.register(key, S_BOOL)
            case PIte(c, t, e):
                self.fresh_count += 1
                key = self.register(("ite", self.fresh_count), s)
                k = PVar(f"ite!{self.fresh_count}", s)
                self.memo_t[k] = key
                lc = self.formula(c)
                self.clauses.append([-lc, self.formula(PBin("=", k, t))])
                self.clauses.append([lc, self.formula(PBin("=", k, e))])
            case _ if s == S_BOOL:
                # a formula in argument position: name it
                self.fresh_count += 1
                key = self.register(("pur", self.fresh_count), S_BOOL)
                lit = self.formula(p)
                b = self.atom(("bool", key))
                self.clauses += [[-b, lit], [b, -lit]]
            case _ if s == S_INT:
                key = self.int_key(p)
            case _:
                raise TypeError(p)
        if s == S_INT and key not in self.int_form:
            self.int_form[key] = Lin(((key, 1),), 0)
        self.memo_t[p] = key
        return key

    def arg_key(self, p: Pred) -> Hashable:
        return self.int_key(p) if sort_of(p) == S_INT else self.term(p)

    # -- formulas --------------------------------------------------------------

    def formula(self, p: Pred) -> int:
        if p in self.memo_f:
            return self.memo_f[p]
        lit = self._formula(p)
        self.memo_f[p] = lit
        return lit

    def _formula(self, p: Pred) -> int:
        match p:
            case PBool(b):
                return self.const(b)
            case PNot(a):
                return -self.formula(a)
            case PBin("&&", l, r):
                return self.gate_and([self.formula(l), self.formula(r)])
            case PBin("||", l, r):
                return -self.gate_and([-self.formula(l), -self.formula(r)])
            case PBin("=>", l, r):
                return -self.gate_and([self.formula(l), -self.formula(r)])
            case PBin("=", l, r) if sort_of(l) == S_BOOL:
                return self.gate_iff(self.formula(l), self.formula(r))
            case PBin("=", l, r) if sort_of(l) == S_INT:
                return self.int_eq(self.lin(l), self.lin(r))
            case PBin("=", l, r):
                a, b = self.term(l), self.term(r)
                if a == b:
                    return self.true
                a, b = sorted((a, b), key=repr)
                return self.atom(("eq", a, b))
            case PBin("<", l, r):
                return self.le(self.lin(l).add(self.lin(r), -1), -1)
            case PBin("<=", l, r):
                return self.le(self.lin(l).add(self.lin(r), -1), 0)
            case PIte(c, t, e):
                lc, lt, le = self.formula(c), self.formula(t), self.formula(e)
                return -self.gate_and([-self.gate_and([lc, lt]), -self.gate_and([-lc, le])])
            case PVar() | PApp():
                return self.atom(("bool", self.term(p)))
        raise TypeError(p)

    def gate_and(self, lits: list[int]) -> int:
        if any(l == -self.true for l in lits):
            return -self.true
        lits = [l for l in lits if l != self.true]
        if not lits:
            return self.true
        if len(lits) == 1:
            return lits[0]
        g = self.new_var()
        for l in lits:
            self.clauses.append([-g, l])
        self.clauses.append([g, *(-l for l in lits)])
        return g

    def gate_iff(self, a: int, b: int) -> int:
        if a == b:
            return self.true
        g = self.new_var()
        self.clauses += [[-g, -a, b], [-g, a, -b], [g, a, b], [g, -a, -b]]
        return g

    def le(self, form: Lin, bound: int) -> int:
        """form <= bound, with the constant of ``form`` folded over."""
        bound -= form.const
        coeffs = dict(form.coeffs)
        if not coeffs:
            return self.const(0 <= bound)
        g = 0
        for v in coeffs.values():
            g = math.gcd(g, v)
        reduced = Lin.of({k: v // g for k, v in coeffs.items()}, 0)
        limit = bound // g
        if reduced.coeffs[0][1] < 0:
            # canonical atoms lead with a positive coefficient: a <= b  iff  not (-a <= -b - 1)
            return -self._le_atom(reduced.scale(-1), -limit - 1)
        return self._le_atom(reduced, limit)

    def _le_atom(self, form: Lin, bound: int) -> int:
        for k, _ in form.coeffs:
            self.int_form.setdefault(k, Lin(((k, 1),), 0))
        return self.atom(("le", form, bound))

    def int_eq(self, a: Lin, b: Lin) -> int:
        d = a.add(b, -1)
        if not d.coeffs:
            return self.const(d.const == 0)
        ka, kb = self.int_key_of(a), self.int_key_of(b)
        ka, kb = sorted((ka, kb), key=repr)
        meaning = ("eq", ka, kb)
        fresh = meaning not in self.atom_var
        v = self.atom(meaning)
        if fresh:
            # integers are totally ordered: = or < or >
            self.clauses.append([v, self.le(d, -1), self.le(d.scale(-1), -1)])
        return v

    def int_key_of(self, form: Lin) -> Hashable:
        key = form.key()
        self.register(key, S_INT)
        self.int_form.setdefault(key, form)
        return key


# -- theory ------------------------------------------------------------------


class Theory:
    """EUF + LIA over one (partial) assignment, rebuilt from scratch."""

    def __init__(self, enc: Encoder, lits: list[int]) -> None:
        self.enc = enc
        self.g = EGraph()
        self.node: dict[Hashable, int] = {}
        self.lia = LiaSolver()
        self.conflict: frozenset | None = None
        self.unknown: str | None = None
        self.t_node = self.g.const(True)
        self.f_node = self.g.const(False)
        for key in enc.terms:
            self.build(key)
        self.lits: list[int] = []
        self.extend(lits)

    def extend(self, lits: list[int]) -> None:
        for lit in lits:
            self.lits.append(lit)
            if self.g.conflict is None:
                self.assert_lit(lit)

    def build(self, key: Hashable) -> int:
        if key in self.node:
            return self.node[key]
        if key == TRUE_KEY:
            n = self.t_node
        elif key == FALSE_KEY:
            n = self.f_node
        elif isinstance(key, tuple) and key[0] == "num":
            n = self.g.const(("int", key[1]))
        elif isinstance(key, tuple) and key[0] == "app":
            args = tuple(self.build(a) for a in key[2])
            n = self.g.add(("fn", key[1]), args)
        else:
            n = self.g.add(("leaf", key))
        self.node[key] = n
        return n

    def assert_lit(self, lit: int) -> None:
        meaning = self.enc.meaning[abs(lit) - 1]
        if meaning is None:
            return
        why = frozenset((lit,))
        pos = lit > 0
        match meaning:
            case ("eq", a, b):
                na, nb = self.build(a), self.build(b)
                if pos:
                    self.g.assert_eq(na, nb, why)
                else:
                    self.g.assert_neq(na, nb, why)
                if pos and self.enc.terms[a] == S_INT:
                    d = self.enc.int_form[a].add(self.enc.int_form[b], -1)
                    self.lia_add(d, "=", 0, why)
            case ("bool", k):
                self.g.assert_eq(self.build(k), self.t_node if pos else self.f_node, why)
            case ("le", form, bound):
                if pos:
                    self.lia_add(form, "<=", bound, why)
                else:
                    self.lia_add(form.scale(-1), "<=", -bound - 1, why)

    def lia_add(self, form: Lin, op: str, bound: int, why: frozenset) -> None:
        if self.conflict is not None:
            return
        c = Constraint.make(dict(form.coeffs), op, bound - form.const)
        r = self.lia.add(c, why)
        if r is not None:
            self.conflict = r

    def int_nodes(self) -> dict[int, list[Hashable]]:
        by_root: dict[int, list[Hashable]] = {}
        for key, form in self.enc.int_form.items():
            if key in self.node:
                by_root.setdefault(self.g.find(self.node[key]), []).append(key)
        return by_root

    def check(self) -> frozenset | None:
        """Run to a joint fixpoint; returns a conflict explanation or None."""
        if self.g.conflict is not None:
            return self.g.conflict
        if self.conflict is not None:
            return self.conflict
        passed: set[tuple] = set()
        while True:
            # congruence classes → arithmetic equalities
            for root, keys in self.int_nodes().items():
                k0 = keys[0]
                for k in keys[1:]:
                    if (k0, k) in passed:
                        continue
                    passed.add((k0, k))
                    why = self.g.explain(self.node[k0], self.node[k])
                    d = self.enc.int_form[k0].add(self.enc.int_form[k], -1)
                    self.lia_add(d, "=", 0, why)
                    if self.conflict is not None:
                        return self.conflict
            r = self.lia.check()
            if r == "unknown":
                self.unknown = "BranchDepth"
                return None
            if r is not None:
                return r
            # arithmetic → congruence: only pairs that could matter
            merged = False
            for a, b in self.interface_pairs():
                why = self.entailed_eq(a, b)
                if why == "unknown":
                    self.unknown = "BranchDepth"
                    return None
                if why is not None:
                    self.g.merge(self.node[a], self.node[b], ("lit", why))
                    merged = True
                    if self.g.conflict is not None:
                        return self.g.conflict
            if not merged:
                # leave an integral assignment behind for model building
                r = self.lia.check()
                if r == "unknown":
                    self.unknown = "BranchDepth"
                    return None
                return r

    def interface_pairs(self) -> list[tuple[Hashable, Hashable]]:
        """Int arguments of same-symbol applications that agree in the model."""
        shared: dict[Hashable, None] = {}
        for key, args in self.enc.args_of.items():
            for a in args:
                if self.enc.terms.get(a) == S_INT:
                    shared[a] = None
        groups: dict[Fraction, list[Hashable]] = {}
        for k in shared:
            groups.setdefault(self.int_value(k), []).append(k)
        out = []
        for keys in groups.values():
            roots: dict[int, Hashable] = {}
            for k in keys:
                roots.setdefault(self.g.find(self.node[k]), k)
            reps = list(roots.values())
            for i in range(len(reps)):
                for j in range(i + 1, len(reps)):
                    out.append((reps[i], reps[j]))
        return out

    def int_value(self, key: Hashable) -> Fraction:
        form = self.enc.int_form[key]
        total = Fraction(form.const)
        for k, v in form.coeffs:
            total += v * self.lia.value(k) if k in self.lia.var_of else 0
        return total

    def entailed_eq(self, a: Hashable, b: Hashable):
        d = self.enc.int_form[a].add(self.enc.int_form[b], -1)
        reasons: set = set()
        for form in (d, d.scale(-1)):
            self.lia.sx.push()
            r = self.lia.add(Constraint.make(dict(form.coeffs), "<=", -1 - form.const),
                             frozenset())
            if r is None:
                r = self.lia.check()
            self.lia.sx.pop()
            if r is None or r == "unknown":
                return r if r == "unknown" else None
            reasons |= r
        return frozenset(reasons)

    def implied(self, unassigned: Iterable[int]) -> list[tuple[int, frozenset]]:
        """Atoms the congruence closure already decides."""
        out = []
        for v in unassigned:
            meaning = self.enc.meaning[v - 1]
            match meaning:
                case ("eq", a, b):
                    na, nb = self.node[a], self.node[b]
                    if self.g.same(na, nb):
                        out.append((v, self.g.explain(na, nb)))
                case ("bool", k):
                    n = self.node[k]
                    if self.g.same(n, self.t_node):
                        out.append((v, self.g.explain(n, self.t_node)))
                    elif self.g.same(n, self.f_node):
                        out.append((-v, self.g.explain(n, self.f_node)))
        return out

    # -- models ----------------------------------------------------------------

    def model(self) -> tuple[dict, dict] | None:
        """Values for every term key plus function tables, or None if the
        arithmetic assignment collapses two classes congruence keeps apart."""
        vals: dict[Hashable, object] = {}
        ints = self.lia.model()
        for key, sort in self.enc.terms.items():
            n = self.node[key]
            root = self.g.find(n)
            if sort == S_INT:
                form = self.enc.int_form[key]
                vals[key] = form.const + sum(v * ints.get(k, 0) for k, v in form.coeffs)
            elif sort == S_BOOL:
                vals[key] = self.g.same(root, self.t_node)
            else:
                vals[key] = f"{sort}!{root}"
        tables: dict[str, dict] = {}
        for key, args in self.enc.args_of.items():
            if key[0] != "app":
                continue
            point = tuple(vals[a] for a in args)
            table = tables.setdefault(key[1], {})
            if table.setdefault(point, vals[key]) != vals[key]:
                return None
        return vals, tables


# -- CDCL --------------------------------------------------------------------


class Sat:
    def __init__(self, enc: Encoder, budget: int) -> None:
        self.enc = enc
        self.budget = budget
        self.leaves = 0
        n = enc.nvars + 1
        self.value: list[bool | None] = [None] * n
        self.level = [0] * n
        self.reason: list[list[int] | None] = [None] * n
        self.trail: list[int] = []
        self.lim: list[int] = []
        self.clauses = [list(dict.fromkeys(c)) for c in enc.clauses]
        self.watch: dict[int, list[int]] = {}
        self.theory_vars = [v for v in range(1, n) if enc.meaning[v - 1] is not None]
        self.qhead = 0
        self.last_theory: Theory | None = None

    def lit_value(self, lit: int) -> bool | None:
        v = self.value[abs(lit)]
        if v is None:
            return None
        return v if lit > 0 else not v

    def assign(self, lit: int, reason: list[int] | None) -> None:
        v = abs(lit)
        self.value[v] = lit > 0
        self.level[v] = len(self.lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def propagate(self) -> list[int] | None:
        """Unit propagation by clause scanning; returns a falsified clause."""
        changed = True
        while changed:
            changed = False
            for c in self.clauses:
                unassigned = None
                count = 0
                sat = False
                for l in c:
                    val = self.lit_value(l)
                    if val is True:
                        sat = True
                        break
                    if val is None:
                        count += 1
                        unassigned = l
                        if count > 1:
                            break
                if sat or count > 1:
                    continue
                if count == 0:
                    return c
                self.assign(unassigned, c)
                changed = True
        return None

    def backtrack(self, level: int) -> None:
        while len(self.lim) > level:
            mark = self.lim.pop()
            while len(self.trail) > mark:
                v = abs(self.trail.pop())
                self.value[v] = None
                self.reason[v] = None

    def analyze(self, conflict: list[int]) -> tuple[list[int], int]:
        cur = len(self.lim)
        seen: set[int] = set()
        learnt: list[int] = []
        counter = 0
        idx = len(self.trail) - 1
        clause = conflict
        p = None
        while True:
            for l in clause:
                v = abs(l)
                if v in seen or self.level[v] == 0:
                    continue
                seen.add(v)
                if self.level[v] == cur:
                    counter += 1
                else:
                    learnt.append(l)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            counter -= 1
            if counter == 0:
                break
            clause = [l for l in self.reason[abs(p)] if abs(l) != abs(p)]
        learnt.insert(0, -p)
        back = max((self.level[abs(l)] for l in learnt[1:]), default=0)
        return learnt, back

    def resolve_conflict(self, clause: list[int]) -> bool:
        """Learn from a falsified clause; False when unsatisfiable."""
        self.leaves += 1
        if self.leaves > self.budget:
            raise Budget()
        top = max((self.level[abs(l)] for l in clause), default=0)
        if top == 0:
            return False
        if top < len(self.lim):
            self.backtrack(top)
        learnt, back = self.analyze(clause)
        self.backtrack(back)
        self.clauses.append(learnt)
        self.assign(learnt[0], learnt)
        return True

    def theory_lits(self) -> list[int]:
        return [l for l in self.trail if self.enc.meaning[abs(l) - 1] is not None]

    def decide(self) -> int | None:
        for c in self.clauses:
            if any(self.lit_value(l) is True for l in c):
                continue
            for l in c:
                if self.lit_value(l) is None:
                    return l
        return None

    def solve(self) -> Theory | None:
        """A satisfying theory state, or None when unsatisfiable."""
        while True:
            conflict = self.propagate()
            if conflict is not None:
                if not self.resolve_conflict(conflict):
                    return None
                continue
            lits = self.theory_lits()
            th = self.last_theory
            n = len(th.lits) if th is not None else 0
            if th is not None and th.conflict is None and th.g.conflict is None \
                    and not th.unknown and lits[:n] == th.lits:
                th.extend(lits[n:])
            else:
                th = Theory(self.enc, lits)
            self.last_theory = th
            why = th.check()
            if why is not None:
                if not self.resolve_conflict([-l for l in why]):
                    return None
                continue
            if th.unknown:
                raise Budget()
            unassigned = [v for v in self.theory_vars if self.value[v] is None]
            implied = th.implied(unassigned)
            if implied:
                for lit, why in implied:
                    self.assign(lit, [lit, *(-l for l in why)])
                continue
            lit = self.decide()
            if lit is None:
                self.leaves += 1
                return th
            self.lim.append(len(self.trail))
            self.assign(lit, None)


# -- entry points --------------------------------------------------------------


def eliminate(formulas: list[Pred]) -> tuple[list[Pred], dict[PVar, Pred]]:
    """Substitute away variables that a top-level equation defines.

    Returns the remaining conjuncts and, for each eliminated variable, its
    value in terms of the variables that are left.
    """
    defs: dict[PVar, Pred] = {}
    memo: dict[Pred, Pred] = {}

    def resolve(q: Pred) -> Pred:
        if q in memo:
            return memo[q]
        match q:
            case PVar() if q in defs:
                out = resolve(defs[q])
            case PApp(f, args, s) if args:
                out = PApp(f, tuple(map(resolve, args)), s)
            case PBin(op, l, r):
                out = PBin(op, resolve(l), resolve(r))
            case PNot(a):
                out = PNot(resolve(a))
            case PIte(c, t, e):
                out = PIte(resolve(c), resolve(t), resolve(e))
            case _:
                out = q
        memo[q] = out
        return out

    keep = []
    for c in (c for f in formulas for c in conjuncts(f)):
        if isinstance(c, PBin) and c.op == "=":
            l, r = resolve(c.left), resolve(c.right)
            for x, e in ((l, r), (r, l)):
                if isinstance(x, PVar) and x not in pvars(e):
                    defs[x] = e
                    memo.clear()
                    break
            else:
                keep.append(c)
            continue
        keep.append(c)
    out = [simplify(resolve(c)) for c in keep]
    return [c for c in out if c != PTRUE], {x: resolve(x) for x in defs}


def check_sat(formulas: list[Pred], budget: int = BRANCH_BUDGET) -> Valid | Invalid | Unknown:
    """Satisfiability of a conjunction: Valid means *unsatisfiable* here."""
    original = formulas
    formulas, defs = eliminate(formulas)
    enc = Encoder()
    try:
        for f in formulas:
            enc.clauses.append([enc.formula(f)])
    except Nonlinear:
        return Unknown("NonlinearAtom")
    sat = Sat(enc, budget)
    try:
        th = sat.solve()
    except Budget:
        return Unknown("BranchBudget")
    if th is None:
        return Valid()
    built = th.model()
    if built is None:
        return Unknown("ModelReplay")
    vals, tables = built
    for x, e in defs.items():
        vals[("var", x.name, x.sort)] = evaluate(e, vals, tables)
    model = {}
    for key, v in vals.items():
        if key[0] == "var" and "!" not in key[1]:
            model[key[1]] = v
    if not all(evaluate(f, vals, tables) is True for f in original):
        return Unknown("ModelReplay")
    return Invalid(dict(sorted(model.items())))


def evaluate(p: Pred, vals: dict, tables: dict):
    """Evaluate ``p`` in a candidate model (interpreted symbols natively)."""

    def ev(q: Pred):
        match q:
            case PInt(n) | PBool(n):
                return n
            case PVar(n, s):
                return vals.get(("var", n, s), 0 if s == S_INT else False if s == S_BOOL
                                else f"{s}!?")
            case PApp(f, args, s):
                point = tuple(ev(a) for a in args)
                table = tables.get(f, {})
                if point in table:
                    return table[point]
                return 0 if s == S_INT else False if s == S_BOOL else f"{s}!{f}{point}"
            case PNot(a):
                return not ev(a)
            case PIte(c, t, e):
                return ev(t) if ev(c) else ev(e)
            case PBin(op, l, r):
                a = ev(l)
                if op == "&&":
                    return a and ev(r)
                if op == "||":
                    return a or ev(r)
                if op == "=>":
                    return (not a) or ev(r)
                b = ev(r)
                return {"=": lambda: a == b, "<": lambda: a < b, "<=": lambda: a <= b,
                        "+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b}[op]()
        raise TypeError(q)

    return ev(p)
