import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamr.core import BoolLit, Ctor, IntLit, Lam, Var
from lamr.driver import parse_file
from lamr.evaluator import (FunctionEquality, OutOfFuel, Stuck, StuckError, Value, delta,
                            evaluate, is_value, step)
from lamr.parser import parse_expr

from conftest import corpus_text
from gen import PROGRAM, bool_expr, int_expr

NIL = Ctor("Nil", ())


def one(n):
    return Ctor("Cons", (IntLit(n), NIL))


def test_delta_structural_equality():
    assert delta("=", one(1), one(1)) == BoolLit(True)
    assert delta("=", one(1), one(2)) == BoolLit(False)


def test_delta_refuses_functions():
    with pytest.raises(FunctionEquality):
        delta("=", Lam("x", Var("x")), Lam("x", Var("x")))


def test_delta_arithmetic():
    assert delta("-", IntLit(3), IntLit(5)) == IntLit(-2)
    assert delta("<=", IntLit(3), IntLit(3)) == BoolLit(True)
    assert delta("not", BoolLit(True)) == BoolLit(False)


def test_values():
    assert is_value(Lam("x", Var("y")))
    assert is_value(one(3))
    assert not is_value(parse_expr("1 + 2"))


def test_value_does_not_step():
    with pytest.raises(StuckError):
        step(IntLit(1), {})


def test_call_by_value_left_to_right():
    e = parse_expr("(1 + 2) + (3 + 4)")
    assert step(e, {}) == parse_expr("3 + (3 + 4)")


def test_stuck_and_out_of_fuel():
    assert isinstance(evaluate(parse_expr("1 + True")), Stuck)
    assert isinstance(evaluate(parse_expr("undefinedThing")), Stuck)
    omega = parse_expr("(\\x -> x x) (\\x -> x x)")
    r = evaluate(omega, 50)
    assert isinstance(r, OutOfFuel) and r.steps == 50


def closed_term(seed: int):
    rng = random.Random(seed)
    src = int_expr(rng, 4) if seed % 2 else bool_expr(rng, 4)
    return parse_expr(src, PROGRAM.datas)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_step_is_deterministic(seed):
    e = closed_term(seed)
    while not is_value(e):
        a, b = step(e, {}), step(e, {})
        assert a == b
        e = a


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 40))
def test_fuel_monotone(seed, extra):
    e = closed_term(seed)
    r = evaluate(e)
    assert isinstance(r, Value)
    steps = 0
    while not isinstance(evaluate(e, steps), Value):
        steps += 1
    assert evaluate(e, steps) == r
    assert evaluate(e, steps + extra) == r


@pytest.mark.parametrize("src,value", [
    ("fib 10", IntLit(55)),
    ("fib 0", IntLit(0)),
])
def test_fib(src, value):
    p = parse_file(corpus_text("fib"))
    assert evaluate(parse_expr(src, p.datas), 10**6, p.runtime_defs()) == Value(value)


def test_reflected_corpus_functions_never_get_stuck():
    p = parse_file(corpus_text("lists"))
    defs = {**p.runtime_defs(), **parse_file(corpus_text("ackermann")).runtime_defs()}
    rng = random.Random(5)
    for _ in range(50):
        xs = "[" + ", ".join(str(rng.randint(-3, 3)) for _ in range(rng.randint(0, 4))) + "]"
        ys = "[" + ", ".join(str(rng.randint(-3, 3)) for _ in range(rng.randint(0, 3))) + "]"
        for src in (f"{xs} ++ {ys}", f"map (\\x -> x + 1) {xs}",
                    f"{xs} >>= (\\x -> [x, x])", f"ack {rng.randint(0, 2)} {rng.randint(0, 4)}"):
            r = evaluate(parse_expr(src, p.datas), 10**6, defs)
            assert isinstance(r, Value), (src, r)


def test_negative_literals():
    defs = parse_file("").runtime_defs()
    assert evaluate(parse_expr("len [-3, 1]"), defs=defs) == Value(IntLit(2))
    assert evaluate(parse_expr("5 - 1")) == Value(IntLit(4))
    assert evaluate(parse_expr("5 == -5")) == Value(BoolLit(False))


def test_measures_and_generated_functions_run():
    p = parse_file("")
    defs = p.runtime_defs()
    assert evaluate(parse_expr("len [1, 2, 3]"), defs=defs) == Value(IntLit(3))
    assert evaluate(parse_expr("is_Nil Nil"), defs=defs) == Value(BoolLit(True))
    assert evaluate(parse_expr("sel_Cons_2 [1, 2]"), defs=defs) == Value(one(2))
    assert isinstance(evaluate(parse_expr("sel_Cons_1 Nil"), defs=defs), Stuck)
