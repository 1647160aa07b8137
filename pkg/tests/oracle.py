"""Run propositions on sampled arguments with the evaluator."""
from __future__ import annotations

import random

from lamr.core import TRUE, Base, BoolLit, IntLit, Program, TInt, params, result, subst_many
from lamr.evaluator import Value, evaluate

FUEL = 2_000_000


def holds(e, defs) -> bool:
    r = evaluate(e, FUEL, defs)
    assert isinstance(r, Value), r
    return r.expr == BoolLit(True)


def sample_args(p: Program, name: str, rng: random.Random, lo: int, hi: int,
                tries: int = 1000) -> dict:
    """Integers in [lo, hi] for each parameter, satisfying every refinement."""
    d = next(x for x in p.defs if x.name == name)
    defs = p.runtime_defs()
    for _ in range(tries):
        sub: dict = {}
        for x, t in params(d.type):
            assert isinstance(t, Base) and t.base == TInt(), f"{name}: {x} is not an Int"
            v = IntLit(rng.randint(lo, hi))
            if t.refinement != TRUE and not holds(subst_many(t.refinement, {**sub, t.var: v}),
                                                  defs):
                break
            sub[x] = v
        else:
            return sub
    raise AssertionError(f"no arguments for {name} in [{lo}, {hi}]")


def prop_holds(p: Program, name: str, sub: dict) -> bool:
    d = next(x for x in p.defs if x.name == name)
    goal = result(d.type)
    return holds(subst_many(goal.refinement, sub), p.runtime_defs())
