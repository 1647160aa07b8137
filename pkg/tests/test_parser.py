import random

import pytest

from lamr.core import (App, Base, Case, Ctor, Fun, IntLit, Lam, Program, TArrow, TData, TInt,
                       TVar, Var, alpha_eq)
from lamr.driver import parse_file
from lamr.evaluator import Value, evaluate
from lamr.parser import (DuplicateName, NonExhaustive, NonUniformArity, OverlappingPatterns,
                         ParseError, SyntaxError_, UnknownConstructor, load_prelude,
                         parse_expr, parse_program, parse_type, prelude_text, tokenize)
from lamr.pretty import program as show_program
from lamr.pretty import program_alpha_eq

from conftest import CORPUS_FILES, corpus_text


def run(p, src: str):
    e = parse_expr(src, p.datas)
    r = evaluate(e, 10**6, p.runtime_defs())
    assert isinstance(r, Value), r
    return r.expr


def test_tokens_have_kinds():
    kinds = [t.kind for t in tokenize("fib (n - 1) =. x ** QED")]
    assert kinds[:3] == ["lname", "punct", "lname"]
    assert "sym" in kinds and "uname" in kinds
    assert kinds[-1] == "eof"


def test_comments_are_skipped():
    p = parse_program("-- a comment\nreflect f :: Int -> Int; -- trailing\nf x = x;\n")
    assert [d.name for d in p.defs] == ["f"]


def test_step_becomes_ternary_because():
    e = parse_expr("x =. y ? p")
    assert alpha_eq(e, parse_expr("eqBecause x y p"))


def test_step_without_proof():
    e = parse_expr("x <=. y")
    assert isinstance(e, App) and e.fn.fn == Var("<=.")


def test_list_literal():
    assert parse_expr("[1, 2]") == Ctor("Cons", (IntLit(1), Ctor("Cons", (IntLit(2),
                                                                        Ctor("Nil", ())))))


def test_binder_type_application():
    t = parse_type("xs:List a -> {len xs >= 0}")
    assert isinstance(t, Fun) and t.dom.base == TData("List", (TVar("a"),))


def test_arrow_refinement_base():
    t = parse_type("f:(Int -> Int) -> {v:(Int -> Int) | v = f} -> Int")
    assert isinstance(t.cod.dom, Base) and t.cod.dom.base == TArrow(TInt(), TInt())


def test_unparenthesised_case_patterns():
    p = parse_file("data Maybe a = Nothing | Just a;")
    assert run(p, "case Just 3 of { Nothing -> 0; Just y -> y + 1 }") == IntLit(4)


def test_nat_alias_refines():
    t = parse_type("n:Nat -> Int")
    assert isinstance(t.dom, Base) and t.dom.refinement != Base("v", TInt()).refinement


ERRORS = [
    ("reflect f :: Int -> Int;\nf x = 1;\nreflect f :: Int -> Int;\nf x = 2;\n", DuplicateName),
    ("reflect f :: Int -> Int;\nf x = Foo;\n", UnknownConstructor),
    ("reflect f :: List Int -> Int;\nf Nil = 0;\n", NonExhaustive),
    ("reflect f :: List Int -> Int;\nf Nil = 0;\nf Nil = 1;\nf (Cons x xs) = 2;\n",
     OverlappingPatterns),
    ("reflect f :: Int -> Int -> Int;\nf 0 = \\y -> y;\nf x y = 1;\n", NonUniformArity),
    ("reflect f :: List Int -> Int;\nf (Cons x (Cons y z)) = 0;\nf xs = 1;\n", SyntaxError_),
    ("reflect f :: Int -> Int\nf x = 1;\n", SyntaxError_),
    ("reflect f :: Int -> Int;\n", SyntaxError_),
]


@pytest.mark.parametrize("src,kind", ERRORS)
def test_errors(src, kind):
    with pytest.raises(kind) as err:
        parse_file(src)
    assert err.value.span is not None


def test_errors_are_parse_errors():
    assert all(issubclass(k, ParseError) for _, k in ERRORS)


def test_prelude_names_are_reserved():
    with pytest.raises(DuplicateName):
        parse_file("let trivial :: Prop;\ntrivial = ();\n")


# -- desugaring ----------------------------------------------------------------

def test_fib_matches_three_branch_definition():
    p = parse_file(corpus_text("fib") + """
reflect fibP :: Nat -> Nat;
fibP n = if n == 0 then 0 else if n == 1 then 1 else fibP (n - 1) + fibP (n - 2);
""")
    for n in range(12):
        assert run(p, f"fib {n}") == run(p, f"fibP {n}")


GUARDS = """
reflect g :: Int -> Int -> Int;
g x y
  | x < y = 1
  | x == y = 2
  | x < y + 5 = 3
  | otherwise = 4;

reflect h :: Int -> Int -> Int;
h 0 y = 10;
h x 0 = 20;
h x y = if x < y then 30 else 40;
"""


def test_guard_order_first_match_wins():
    p = parse_file(GUARDS)
    rng = random.Random(3)
    for _ in range(200):
        x, y = rng.randint(-8, 8), rng.randint(-8, 8)
        want = 1 if x < y else 2 if x == y else 3 if x < y + 5 else 4
        assert run(p, f"g ({x}) ({y})") == IntLit(want)
        want = 10 if x == 0 else 20 if y == 0 else 30 if x < y else 40
        assert run(p, f"h ({x}) ({y})") == IntLit(want)


def test_equations_become_one_case():
    p = parse_file("reflect len2 :: List Int -> Int;\nlen2 Nil = 0;\nlen2 (Cons x xs) = 1;\n")
    body = p.defs[-1].body
    assert isinstance(body, Lam) and isinstance(body.body, Case)
    assert [a.ctor for a in body.body.alts] == ["Nil", "Cons"]


def test_partial_constructor_gets_a_wrapper():
    e = parse_expr("map (Cons 1) Nil")
    assert "Lam" in repr(e)


# -- printing back -------------------------------------------------------------

def test_prelude_round_trips():
    pre = load_prelude()
    again = parse_program(show_program(pre), base=Program())
    assert program_alpha_eq(pre, again)


@pytest.mark.parametrize("path", CORPUS_FILES, ids=lambda p: p.name)
def test_corpus_round_trips(path):
    prog = parse_program(path.read_text())
    again = parse_program(show_program(prog))
    assert program_alpha_eq(prog, again)


def test_prelude_text_mentions_qed():
    assert "Qed" in prelude_text()
