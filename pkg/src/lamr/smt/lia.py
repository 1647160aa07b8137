"""Linear integer arithmetic: bounded simplex plus branch and bound.

Constraints are kept as ``sum(a_i * x_i) <= c`` or ``= c`` with integer
coefficients.  Every bound carries a reason (a frozenset of caller ids) so
that an infeasible tableau row explains itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Mapping

Reason = frozenset

BB_DEPTH = 32


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[tuple[Hashable, int], ...]
    op: str  # "<=" or "="
    const: int

    @staticmethod
    def make(coeffs: Mapping[Hashable, int], op: str, const: int) -> Constraint:
        items = tuple(sorted(((k, v) for k, v in coeffs.items() if v), key=lambda kv: repr(kv[0])))
        return Constraint(items, op, const)

    def holds(self, model: Mapping[Hashable, int]) -> bool:
        lhs = sum(a * model.get(x, 0) for x, a in self.coeffs)
        return lhs <= self.const if self.op == "<=" else lhs == self.const


@dataclass(frozen=True)
class Feasible:
    model: dict


@dataclass(frozen=True)
class Infeasible:
    # multipliers per constraint index when refuted over the rationals
    certificate: dict[int, Fraction] | None
    reason: frozenset = frozenset()


@dataclass(frozen=True)
class LiaUnknown:
    reason: str


class Simplex:
    """General simplex with bounds on every variable (Bland's rule)."""

    def __init__(self) -> None:
        self.rows: dict[int, dict[int, Fraction]] = {}
        self.val: list[Fraction] = []
        self.lo: list[tuple[Fraction, Reason] | None] = []
        self.hi: list[tuple[Fraction, Reason] | None] = []
        self.trail: list[tuple[int, bool, tuple | None]] = []
        self.marks: list[int] = []
        self.row_keys: dict[tuple, int] = {}

    def new_var(self) -> int:
        self.val.append(Fraction(0))
        self.lo.append(None)
        self.hi.append(None)
        return len(self.val) - 1

    def slack(self, coeffs: Mapping[int, int], share: bool = True) -> int:
        """A basic variable standing for ``sum(coeffs)`` (reused if seen)."""
        key = tuple(sorted(coeffs.items()))
        if share and key in self.row_keys:
            return self.row_keys[key]
        s = self.new_var()
        row: dict[int, Fraction] = {}
        for x, a in coeffs.items():
            if x in self.rows:
                for y, b in self.rows[x].items():
                    row[y] = row.get(y, 0) + a * b
            else:
                row[x] = row.get(x, 0) + Fraction(a)
        self.rows[s] = {y: b for y, b in row.items() if b}
        self.val[s] = sum((b * self.val[y] for y, b in self.rows[s].items()), Fraction(0))
        self.row_keys[key] = s
        return s

    # -- bounds with backtracking ------------------------------------------

    def push(self) -> None:
        self.marks.append(len(self.trail))

    def pop(self) -> None:
        mark = self.marks.pop()
        while len(self.trail) > mark:
            x, upper, old = self.trail.pop()
            (self.hi if upper else self.lo)[x] = old

    def assert_upper(self, x: int, c: Fraction, why: Reason) -> Reason | None:
        lo, hi = self.lo[x], self.hi[x]
        if hi is not None and hi[0] <= c:
            return None
        if lo is not None and lo[0] > c:
            return lo[1] | why
        self.trail.append((x, True, hi))
        self.hi[x] = (Fraction(c), why)
        if x not in self.rows and self.val[x] > c:
            self._update(x, Fraction(c))
        return None

    def assert_lower(self, x: int, c: Fraction, why: Reason) -> Reason | None:
        lo, hi = self.lo[x], self.hi[x]
        if lo is not None and lo[0] >= c:
            return None
        if hi is not None and hi[0] < c:
            return hi[1] | why
        self.trail.append((x, False, lo))
        self.lo[x] = (Fraction(c), why)
        if x not in self.rows and self.val[x] < c:
            self._update(x, Fraction(c))
        return None

    # -- core --------------------------------------------------------------

    def _update(self, x: int, v: Fraction) -> None:
        d = v - self.val[x]
        for b, row in self.rows.items():
            a = row.get(x)
            if a:
                self.val[b] += a * d
        self.val[x] = v

    def _pivot(self, b: int, n: int) -> None:
        row = self.rows.pop(b)
        a = row.pop(n)
        # n = (b - sum(row)) / a
        new = {y: -c / a for y, c in row.items()}
        new[b] = 1 / a
        self.rows[n] = new
        for k, r in self.rows.items():
            if k == n or n not in r:
                continue
            c = r.pop(n)
            for y, d in new.items():
                w = r.get(y, 0) + c * d
                if w:
                    r[y] = w
                else:
                    r.pop(y, None)

    def check(self) -> Reason | None:
        """None when feasible, otherwise the reasons of a conflicting row."""
        while True:
            bad = None
            for b in sorted(self.rows):
                lo, hi = self.lo[b], self.hi[b]
                v = self.val[b]
                if lo is not None and v < lo[0]:
                    bad = (b, True)
                    break
                if hi is not None and v > hi[0]:
                    bad = (b, False)
                    break
            if bad is None:
                return None
            b, raise_it = bad
            row = self.rows[b]
            pick = None
            for n in sorted(row):
                a = row[n]
                if raise_it:
                    ok = (a > 0 and _below(self.val[n], self.hi[n])) or \
                         (a < 0 and _above(self.val[n], self.lo[n]))
                else:
                    ok = (a < 0 and _below(self.val[n], self.hi[n])) or \
                         (a > 0 and _above(self.val[n], self.lo[n]))
                if ok:
                    pick = n
                    break
            if pick is None:
                return self._explain(b, raise_it)
            target = (self.lo[b] if raise_it else self.hi[b])[0]
            a = row[pick]
            theta = (target - self.val[b]) / a
            self._update(pick, self.val[pick] + theta)
            self._pivot(b, pick)

    def _explain(self, b: int, raise_it: bool) -> Reason:
        why = set((self.lo[b] if raise_it else self.hi[b])[1])
        for n, a in self.rows[b].items():
            use_hi = (a > 0) == raise_it
            bound = self.hi[n] if use_hi else self.lo[n]
            why |= bound[1]
        return frozenset(why)

    def farkas(self, b: int, raise_it: bool) -> list[tuple[int, bool, Fraction]]:
        """The conflicting bounds with their multipliers: (var, upper?, weight)."""
        out = [(b, not raise_it, Fraction(1))]
        for n, a in self.rows[b].items():
            use_hi = (a > 0) == raise_it
            out.append((n, use_hi, abs(a)))
        return out

    def conflict_row(self) -> tuple[int, bool] | None:
        for b in sorted(self.rows):
            lo, hi = self.lo[b], self.hi[b]
            if lo is not None and self.val[b] < lo[0]:
                return b, True
            if hi is not None and self.val[b] > hi[0]:
                return b, False
        return None


def _below(v: Fraction, hi) -> bool:
    return hi is None or v < hi[0]


def _above(v: Fraction, lo) -> bool:
    return lo is None or v > lo[0]


class LiaSolver:
    """Front end over :class:`Simplex` keyed by caller atoms.

    With ``share`` off every constraint gets its own slack row, so clashes
    surface as row conflicts (which is what certificates are read from).
    """

    def __init__(self, share: bool = True) -> None:
        self.sx = Simplex()
        self.share = share
        self.var_of: dict[Hashable, int] = {}
        self.atoms: list[Hashable] = []
        # (var, upper?) -> (constraint tag, scale), for certificates
        self.origin: dict[tuple[int, bool], tuple[int, int]] = {}

    def var(self, atom: Hashable) -> int:
        if atom not in self.var_of:
            self.var_of[atom] = self.sx.new_var()
            self.atoms.append(atom)
        return self.var_of[atom]

    def _target(self, coeffs: Mapping[Hashable, int]) -> tuple[int | None, int]:
        """The simplex variable for a normalised form and its scale."""
        items = {self.var(k): v for k, v in coeffs.items() if v}
        if not items:
            return None, 1
        g = 0
        for v in items.values():
            g = math.gcd(g, v)
        first = min(items)
        if items[first] < 0:
            g = -g
        items = {k: v // g for k, v in items.items()}
        if self.share and len(items) == 1 and items[first] == 1:
            return first, g
        return self.sx.slack(items, self.share), g

    def add(self, c: Constraint, why: Reason, tag: int | None = None) -> Reason | None:
        """Assert a constraint; returns a conflict reason if refuted outright."""
        x, g = self._target(dict(c.coeffs))
        if x is None:
            ok = 0 <= c.const if c.op == "<=" else c.const == 0
            return None if ok else why
        bound = Fraction(c.const, g)
        if tag is not None:
            self.origin[(x, True)] = self.origin[(x, False)] = (tag, g)
        if c.op == "=":
            if bound.denominator != 1:
                return why  # parity: no integer solution
            return self.sx.assert_upper(x, bound, why) or self.sx.assert_lower(x, bound, why)
        if g > 0:
            return self.sx.assert_upper(x, Fraction(math.floor(bound)), why)
        return self.sx.assert_lower(x, Fraction(math.ceil(bound)), why)

    def check(self, depth: int = BB_DEPTH) -> Reason | None | str:
        """None if integer feasible, a reason if not, "unknown" past the depth.

        On success the assignment left in the tableau is integral.
        """
        why = self.sx.check()
        if why is not None:
            return why
        for atom in self.atoms:
            x = self.var_of[atom]
            v = self.sx.val[x]
            if v.denominator == 1:
                continue
            if depth == 0:
                return "unknown"
            reasons: set = set()
            for upper in (True, False):
                self.sx.push()
                if upper:
                    r = self.sx.assert_upper(x, Fraction(math.floor(v)), frozenset())
                else:
                    r = self.sx.assert_lower(x, Fraction(math.ceil(v)), frozenset())
                if r is None:
                    r = self.check(depth - 1)
                self.sx.pop()
                if r is None or r == "unknown":
                    return r
                reasons |= r
            return frozenset(reasons)
        return None

    def model(self) -> dict[Hashable, int]:
        return {a: int(self.sx.val[x]) for a, x in self.var_of.items()}

    def value(self, atom: Hashable) -> Fraction:
        return self.sx.val[self.var_of[atom]]


def lia_decide(constraints: list[Constraint]) -> Feasible | Infeasible | LiaUnknown:
    """Decide a conjunction of integer linear constraints.

    A rational refutation comes with Farkas multipliers over the input
    constraints (``<=`` rows take nonnegative weights, ``=`` rows any sign).
    Refutations that need integrality carry no certificate.
    """
    lia = LiaSolver(share=False)
    for i, c in enumerate(constraints):
        r = lia.add(c, frozenset((i,)), tag=i)
        if r is not None:
            cert = None
            if not c.coeffs:
                cert = {i: Fraction(1 if c.const < 0 else -1)}
            return Infeasible(cert, r)
    rational = lia.sx.check()
    if rational is not None:
        return Infeasible(_certificate(lia, constraints), rational)
    r = lia.check()
    if r == "unknown":
        return LiaUnknown("BranchDepth")
    if r is not None:
        return Infeasible(None, r)
    return Feasible(lia.model())


def _certificate(lia: LiaSolver, constraints) -> dict[int, Fraction] | None:
    row = lia.sx.conflict_row()
    if row is None:
        return None
    cert: dict[int, Fraction] = {}
    for x, upper, w in lia.sx.farkas(*row):
        if (x, upper) not in lia.origin:
            continue  # an unbounded definitional variable
        tag, g = lia.origin[(x, upper)]
        weight = w / g if upper else -w / g
        cert[tag] = cert.get(tag, 0) + weight
    scale = math.lcm(*(f.denominator for f in cert.values())) if cert else 1
    cert = {k: v * scale for k, v in cert.items() if v}
    return cert if check_certificate(constraints, cert) else None


def check_certificate(constraints: list[Constraint], cert: Mapping[int, Fraction]) -> bool:
    """sum(w_i * (lhs_i - c_i)) must cancel every variable and leave a negative bound."""
    total: dict[Hashable, Fraction] = {}
    bound = Fraction(0)
    for i, w in cert.items():
        c = constraints[i]
        if c.op == "<=" and w < 0:
            return False
        for x, a in c.coeffs:
            total[x] = total.get(x, 0) + w * a
        bound += w * c.const
    return all(v == 0 for v in total.values()) and bound < 0
