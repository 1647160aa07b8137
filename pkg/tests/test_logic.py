import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamr.core import TArrow, TBool, TData, TInt, TVar
from lamr.driver import check_source
from lamr.logic import (VC, LogicEnv, NotTranslatable, alpha_instances, beta_instances, embed,
                        is_lam, maxlam, render_vc, strengthen, translate)
from lamr.parser import parse_expr
from lamr.pred import PTRUE, PVar, S_BOOL, S_INT, sort_of, subterms, to_sexpr
from lamr.shapes import annotate_expr

from conftest import corpus_text
from gen import PROGRAM, bool_expr, int_expr

ENV = LogicEnv.for_program(PROGRAM)
LIST_INT = TData("List", (TInt(),))


def tr(src, ctx=None, want=None):
    ctx = ctx or {}
    e, _ = annotate_expr(parse_expr(src, PROGRAM.datas), ctx, PROGRAM, want)
    return translate(e, {x: PVar(x, embed(s)) for x, s in ctx.items()}, ENV)


@pytest.mark.parametrize("shape,sort", [
    (TArrow(TInt(), TInt()), "Fun_Int_Int"),
    (LIST_INT, "Univ"),
    (TVar("a"), "Univ"),
    (TBool(), "Bool"),
    (TArrow(TInt(), TArrow(TBool(), TInt())), "Fun_Int_Fun_Bool_Int"),
])
def test_embed(shape, sort):
    assert str(embed(shape)) == sort


@pytest.mark.parametrize("src,ctx,want,out", [
    ("\\x -> x + 0", {}, TArrow(TInt(), TInt()), "(lam_Int_Int x1$Int (+ x1$Int 0))"),
    ("case b of {True -> 0; False -> 1}", {"b": TBool()}, TInt(), "(ite b 0 1)"),
    ("case xs of {Nil -> 0; Cons y ys -> y}", {"xs": LIST_INT}, TInt(),
     "(ite (is_Nil xs) 0 (sel_Cons_1@Int xs))"),
    ("(\\x -> x + 1) 5 == 6", {}, TBool(),
     "(= (app_Int_Int (lam_Int_Int x1$Int (+ x1$Int 1)) 5) 6)"),
])
def test_translate_examples(src, ctx, want, out):
    assert to_sexpr(tr(src, ctx, want)) == out


def test_nested_lambdas_take_increasing_binders():
    p = tr("\\x -> \\y -> x + y", {}, TArrow(TInt(), TArrow(TInt(), TInt())))
    assert maxlam(S_INT, p) == 2
    assert maxlam(S_BOOL, p) == 0


def test_alpha_equivalent_terms_translate_identically():
    # normalised binders make alpha-equivalent lambdas the same term
    t = TArrow(TInt(), TInt())
    assert tr("\\x -> x + 1", {}, t) == tr("\\y -> y + 1", {}, t)
    assert tr("\\a -> \\b -> a - b", {}, TArrow(TInt(), t)) == \
        tr("\\p -> \\q -> p - q", {}, TArrow(TInt(), t))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_binder_names_do_not_matter(seed):
    body = int_expr(random.Random(seed), 3)
    t = TArrow(TInt(), TInt())
    assert tr(f"\\zz -> ({body}) + zz", {}, t) == tr(f"\\ww -> ({body}) + ww", {}, t)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_translation_preserves_sorts(seed):
    rng = random.Random(seed)
    if seed % 2:
        assert sort_of(tr(int_expr(rng, 4), {}, TInt())) == S_INT
    else:
        assert sort_of(tr(bool_expr(rng, 4), {}, TBool())) == S_BOOL


def test_beta_instance_for_first_order_argument():
    p = tr("(\\x -> x + 1) 5 == 6", {}, TBool())
    [inst] = beta_instances(subterms(p))
    assert to_sexpr(inst) == "(= (app_Int_Int (lam_Int_Int x1$Int (+ x1$Int 1)) 5) (+ 5 1))"


def test_no_beta_instance_when_argument_is_a_lambda():
    p = tr("(\\f -> f) (\\x -> x) == (\\y -> y)", {}, TBool())
    assert beta_instances(subterms(p)) == []


def test_alpha_instances_rename_to_other_binders():
    p = tr("(\\x -> \\y -> y) == (\\x -> \\y -> y)", {}, TBool())
    insts = alpha_instances(subterms(p))
    assert insts and all(is_lam(i.left) for i in insts)


def test_strengthen_proves_beta_goal():
    from lamr.smt import Valid, solve
    goal = tr("(\\x -> x + 1) 5 == 6", {}, TBool())
    assert not isinstance(solve(VC(PTRUE, goal)), Valid)
    assert isinstance(solve(strengthen(VC(PTRUE, goal), ENV)), Valid)


def test_strengthen_respects_budget():
    goal = tr("(\\x -> x + 1) 5 == 6", {}, TBool())
    vc = strengthen(VC(PTRUE, goal), ENV, budget=0)
    assert vc.budget_hit and vc.instances == ()


def test_reader_alpha_vc_uses_alpha_instances():
    report = check_source(corpus_text("lambda"), "lambda.rfl")
    vcs = [o.vc for o in report.obligations if o.definition == "reader_alpha" and o.vc]
    assert vcs
    assert any(is_lam(i.left) for vc in vcs for i in vc.instances if hasattr(i, "left"))


def test_datatype_instances_on_constructor_terms():
    from lamr.smt import Valid, solve
    goal = tr("len [1, 2] == 2", {}, TBool())
    assert isinstance(solve(strengthen(VC(PTRUE, goal), ENV)), Valid)


def test_function_equality_of_non_lambda_is_uninterpreted():
    t = TArrow(TInt(), TInt())
    p = tr("f == g", {"f": t, "g": t}, TBool())
    assert to_sexpr(p) == "(= f g)"


def test_render_vc_sections():
    goal = tr("(\\x -> x + 1) 5 == 6", {}, TBool())
    text = render_vc(strengthen(VC(PTRUE, goal), ENV))
    lines = text.splitlines()
    assert lines[0] == "decls:"
    assert "  x1$Int : Int" in lines
    assert "hyp: true" in lines and "inst:" in lines
    assert lines[-1].startswith("goal: (= (app_Int_Int")


def test_free_variable_must_be_in_rho():
    e, _ = annotate_expr(parse_expr("x + 1"), {"x": TInt()}, PROGRAM, TInt())
    with pytest.raises(NotTranslatable):
        translate(e, {}, ENV)
