"""Congruence closure over uninterpreted function applications.

Every merge is recorded in a proof forest, so any derived equality (and
hence any conflict) can be explained by the input reasons that caused it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable


@dataclass(frozen=True)
class Consistent:
    pass


@dataclass(frozen=True)
class Conflict:
    justification: frozenset


class EGraph:
    def __init__(self) -> None:
        self.nodes: list[tuple[Hashable, tuple[int, ...]]] = []
        self.index: dict[tuple, int] = {}
        self.parent: list[int] = []
        self.members: list[list[int]] = []
        self.uses: list[list[int]] = []
        self.value: list[Hashable | None] = []  # interpreted constant of a class, if any
        self.sig: dict[tuple, int] = {}
        self.pf: list[int | None] = []
        self.pf_why: list[tuple | None] = []
        self.diseqs: list[tuple[int, int, frozenset]] = []
        self.conflict: frozenset | None = None

    # -- construction ------------------------------------------------------

    def add(self, fn: Hashable, args: tuple[int, ...] = (), value: Hashable | None = None) -> int:
        key = (fn, args)
        if key in self.index:
            return self.index[key]
        n = len(self.nodes)
        self.nodes.append(key)
        self.index[key] = n
        self.parent.append(n)
        self.members.append([n])
        self.uses.append([])
        self.value.append(value)
        self.pf.append(None)
        self.pf_why.append(None)
        for a in dict.fromkeys(args):
            self.uses[self.find(a)].append(n)
        if args:
            s = self._signature(n)
            other = self.sig.get(s)
            if other is None:
                self.sig[s] = n
            else:
                self.merge(n, other, ("cong", n, other))
        return n

    def find(self, n: int) -> int:
        root = n
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[n] != root:
            self.parent[n], n = root, self.parent[n]
        return root

    def _signature(self, n: int) -> tuple:
        fn, args = self.nodes[n]
        return (fn, tuple(self.find(a) for a in args))

    # -- merging -----------------------------------------------------------

    def assert_eq(self, a: int, b: int, why: frozenset) -> None:
        self.merge(a, b, ("lit", why))

    def assert_neq(self, a: int, b: int, why: frozenset) -> None:
        self.diseqs.append((a, b, why))
        if self.conflict is None and self.find(a) == self.find(b):
            self.conflict = self.explain(a, b) | why

    def merge(self, a: int, b: int, why: tuple) -> None:
        pending = [(a, b, why)]
        while pending:
            a, b, why = pending.pop()
            ra, rb = self.find(a), self.find(b)
            if ra == rb:
                continue
            self._link(a, b, why)
            if len(self.members[ra]) > len(self.members[rb]):
                ra, rb = rb, ra
            va, vb = self.value[ra], self.value[rb]
            self.parent[ra] = rb
            self.members[rb].extend(self.members[ra])
            if va is not None:
                if vb is not None and va != vb and self.conflict is None:
                    self.conflict = self.explain(self._valued(rb, va), self._valued(rb, vb))
                self.value[rb] = vb if vb is not None else va
            for p in self.uses[ra]:
                s = self._signature(p)
                q = self.sig.get(s)
                if q is None:
                    self.sig[s] = p
                elif self.find(q) != self.find(p):
                    pending.append((p, q, ("cong", p, q)))
            self.uses[rb].extend(self.uses[ra])
        if self.conflict is None:
            for x, y, why in self.diseqs:
                if self.find(x) == self.find(y):
                    self.conflict = self.explain(x, y) | why
                    break

    def const(self, v: Hashable) -> int:
        """An interpreted constant: distinct constants never merge."""
        return self.add(("value", v), (), value=v)

    def _valued(self, root: int, v: Hashable) -> int:
        return self.index[(("value", v), ())]

    # -- proof forest ------------------------------------------------------

    def _link(self, a: int, b: int, why: tuple) -> None:
        # reroot a's tree at a, then hang it below b
        prev, prev_why, node = None, None, a
        while node is not None:
            nxt, nxt_why = self.pf[node], self.pf_why[node]
            self.pf[node], self.pf_why[node] = prev, prev_why
            prev, prev_why, node = node, nxt_why, nxt
        self.pf[a], self.pf_why[a] = b, why

    def explain(self, a: int, b: int) -> frozenset:
        out: set = set()
        todo = [(a, b)]
        done: set[tuple[int, int]] = set()
        while todo:
            x, y = todo.pop()
            if x == y or (x, y) in done:
                continue
            done.add((x, y))
            up_x = self._ancestors(x)
            depth = {n: i for i, n in enumerate(up_x)}
            path_y = []
            n = y
            while n not in depth:
                path_y.append(n)
                n = self.pf[n]
                if n is None:
                    raise ValueError("explaining an equality that does not hold")
            meet = n
            for n in up_x[:depth[meet]] + path_y:
                why = self.pf_why[n]
                if why[0] == "lit":
                    out |= why[1]
                else:
                    _, p, q = why
                    for u, v in zip(self.nodes[p][1], self.nodes[q][1]):
                        todo.append((u, v))
        return frozenset(out)

    def _ancestors(self, n: int) -> list[int]:
        out = [n]
        while self.pf[n] is not None:
            n = self.pf[n]
            out.append(n)
        return out

    # -- queries -----------------------------------------------------------

    def same(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def classes(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for n in range(len(self.nodes)):
            out.setdefault(self.find(n), []).append(n)
        return out


def congruence_close(eqs, diseqs) -> Consistent | Conflict:
    """Decide a conjunction of ground (dis)equalities between terms.

    Terms are nested tuples ``(fn, arg, ...)`` or bare hashable constants.
    The justification of a conflict lists the indices of the input
    equalities used (diseqs are numbered after them).
    """
    g = EGraph()

    def node(t) -> int:
        if isinstance(t, tuple):
            return g.add(t[0], tuple(node(a) for a in t[1:]))
        return g.add(t)

    for i, (a, b) in enumerate(eqs):
        g.assert_eq(node(a), node(b), frozenset((i,)))
    for j, (a, b) in enumerate(diseqs):
        g.assert_neq(node(a), node(b), frozenset((len(eqs) + j,)))
    if g.conflict is not None:
        return Conflict(g.conflict)
    return Consistent()
