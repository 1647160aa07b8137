import random

from hypothesis import given, settings
from hypothesis import strategies as st

from lamr.core import (App, BoolLit, Case, Alt, IntLit, Lam, Var, alpha_eq, anf_normalize,
                       binop, free_vars, fresh, show, substitute)
from lamr.evaluator import Value, evaluate
from lamr.parser import parse_expr

from gen import PROGRAM, bool_expr, int_expr

NAMES = ["x", "y", "z"]


def terms(depth=3):
    leaf = st.one_of(st.sampled_from(NAMES).map(Var), st.integers(-3, 3).map(IntLit))
    return st.recursive(leaf, lambda sub: st.one_of(
        st.tuples(st.sampled_from(NAMES), sub).map(lambda p: Lam(*p)),
        st.tuples(sub, sub).map(lambda p: App(*p)),
        st.tuples(sub, sub).map(lambda p: binop("+", *p)),
    ), max_leaves=12)


@given(terms(), st.sampled_from(NAMES), terms())
def test_substitute_free_vars(e, x, v):
    assert free_vars(substitute(e, x, v)) <= (free_vars(e) - {x}) | free_vars(v)


@given(terms(), st.sampled_from(NAMES), terms())
def test_substitute_avoids_capture(e, x, v):
    # every free variable of v that lands in the result stays free
    out = substitute(e, x, v)
    if x in free_vars(e):
        assert free_vars(v) <= free_vars(out)


@given(terms())
def test_alpha_eq_reflexive(e):
    assert alpha_eq(e, e)


@given(terms(), terms())
def test_alpha_eq_symmetric(a, b):
    assert alpha_eq(a, b) == alpha_eq(b, a)


@given(terms())
def test_alpha_eq_under_renaming(e):
    # renaming a bound variable to a fresh one gives an alpha-equal term
    if isinstance(e, Lam):
        y = fresh("w", free_vars(e.body) | {e.param})
        assert alpha_eq(e, Lam(y, substitute(e.body, e.param, Var(y))))


@given(terms(), terms(), terms())
def test_alpha_eq_transitive(a, b, c):
    if alpha_eq(a, b) and alpha_eq(b, c):
        assert alpha_eq(a, c)


def test_alpha_eq_examples():
    assert alpha_eq(Lam("x", Var("x")), Lam("y", Var("y")))
    assert not alpha_eq(Lam("x", Var("y")), Lam("y", Var("y")))
    assert not alpha_eq(Lam("x", Lam("y", Var("x"))), Lam("x", Lam("y", Var("y"))))
    c1 = Case("s", Var("q"), (Alt("Cons", ("h", "t"), Var("h")),))
    c2 = Case("r", Var("q"), (Alt("Cons", ("a", "b"), Var("a")),))
    assert alpha_eq(c1, c2)


def test_fresh_avoids():
    assert fresh("t", {"t", "t0", "t1"}) not in {"t", "t0", "t1"}


def test_substitute_renames_binder():
    e = Lam("y", binop("+", Var("x"), Var("y")))
    out = substitute(e, "x", Var("y"))
    assert isinstance(out, Lam) and out.param != "y"
    assert "y" in free_vars(out)


def test_anf_names_calls_in_order():
    e = parse_expr("f (g x) (h y)")
    assert show(anf_normalize(e)) == "((\\t0 -> ((\\t1 -> ((f t0) t1)) (h y))) (g x))"


def test_anf_fib_unfoldings():
    e = parse_expr("fib 2 == fib 1 + fib 0")
    out = show(anf_normalize(e))
    assert out.endswith("(t0 = t3)) (t1 + t2))) (fib 0))) (fib 1))) (fib 2))")



@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_anf_preserves_value(seed):
    rng = random.Random(seed)
    src = int_expr(rng, 4) if seed % 2 else bool_expr(rng, 4)
    e = parse_expr(src, PROGRAM.datas)
    a, b = evaluate(e), evaluate(anf_normalize(e))
    assert isinstance(a, Value) and isinstance(b, Value)
    assert a.expr == b.expr


def test_anf_example_shape():
    e = parse_expr("(\\x -> x + 1) ((\\y -> y) 2)")
    r = evaluate(anf_normalize(e))
    assert r == Value(IntLit(3))
    assert evaluate(parse_expr("1 < 2")) == Value(BoolLit(True))
