"""The ten acceptance criteria, one test each.

Every test records a one-line verdict; the lines are printed together at
the end of the pytest run (see ``conftest.py``), and running this file as a
script prints them directly.
"""
from __future__ import annotations

import random
import shutil
import tempfile
import time
from pathlib import Path

import pytest

from lamr.checker import Config
from lamr.core import BoolLit, TBool
from lamr.driver import check_source, parse_file
from lamr.evaluator import Value, evaluate
from lamr.logic import VC, LogicEnv, strengthen, translate
from lamr.parser import parse_expr
from lamr.pred import PTRUE, PNot
from lamr.shapes import annotate_expr
from lamr.smt import Valid, emit_smtlib2, solve
from lamr.smt.smtlib import run_external

from conftest import CORPUS_FILES, corpus_text, replace_once, statuses, verdict_of
from gen import PROGRAM, bool_expr
from oracle import prop_holds, sample_args
from sexp import verdict
from test_smt import DATATYPE_CASES, EUF_CASES, LI, LIA_CASES

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[n]


def all_pass(text: str, names: list[str]) -> list[str]:
    """Names among ``names`` that do not fully pass."""
    s = statuses(text)
    return [n for n in names if s.get(n) != {"PASS"}]


# 1 -------------------------------------------------------------------------------

FIB_MUTATIONS = [
    ("prop eqPf_fib3 :: {fib 3 = 2}", "prop eqPf_fib3 :: {fib 3 = 3}", "eqPf_fib3"),
    ("prop eqPf_fib3 :: {fib 3 = 2}", "prop eqPf_fib3 :: {fib 3 = 1}", "eqPf_fib3"),
    ("prop pf_fib2 :: {fib 2 = 1}", "prop pf_fib2 :: {fib 2 = 2}", "pf_fib2"),
    ("prop pf_fib2 :: {fib 2 = 1}", "prop pf_fib2 :: {fib 2 = 0}", "pf_fib2"),
    ("prop pf_fib2' :: {fib 2 = 1}", "prop pf_fib2' :: {fib 2 = 2}", "pf_fib2'"),
    ("prop eqPf_fib2 :: {fib 2 = 1}", "prop eqPf_fib2 :: {fib 2 = 2}", "eqPf_fib2"),
    ("pf_fib2 = fib 2 =. fib 1 + fib 0 =. 1", "pf_fib2 = fib 2 =. fib 1 + fib 0 =. 2",
     "pf_fib2"),
    ("{fib n <= fib (n + 1)}", "{fib (n + 1) <= fib n}", "fibUp"),
    ("| n == 0 = fib 0 <. fib 1", "| n == 0 = fib 0 <. fib 0", "fibUp"),
    ("{fib n <= fib m}", "{fib n <= fib m - 1}", "fibMono"),
]


def test_criterion_1_arithmetic_corpus():
    text = corpus_text("fib")
    names = ["pf_fib2", "pf_fib2'", "eqPf_fib2", "eqPf_fib3", "fibUp", "fMono", "fibMono"]
    start = time.perf_counter()
    report = check_source(text, "fib.rfl")
    elapsed = time.perf_counter() - start
    bad = [n for n in names
           if {o.status for o in report.obligations if o.definition == n} != {"PASS"}]
    survivors = []
    for old, new, name in FIB_MUTATIONS:
        mutated = replace_once(text, old, new)
        if verdict_of(mutated, name) != "FAIL":
            survivors.append(new)
    ok = not bad and not survivors and elapsed < 1.0
    record(1, ok, f"{len(names)} props pass={not bad}, {len(FIB_MUTATIONS)} mutations "
                  f"fail={not survivors}, fib.rfl checked in {elapsed:.2f}s")


# 2 -------------------------------------------------------------------------------

def test_criterion_2_peano_corpus():
    text = corpus_text("peano")
    bad = all_pass(text, ["zeroL", "zeroR", "sucR", "add_com"])
    without = replace_once(text, "=. add b Z ? zeroR b", "=. add b Z")
    v = verdict_of(without, "add_com")
    record(2, not bad and v == "FAIL",
           f"peano props pass={not bad}, add_com without `? zeroR b` -> {v}")


# 3 -------------------------------------------------------------------------------

def test_criterion_3_lists_and_monoids():
    lists = all_pass(corpus_text("lists"), ["assoc", "map_fusion", "bind_append", "betaEq",
                                            "bind_assoc"])
    assert "? betaEq f g x" in corpus_text("lists")
    monoid = all_pass(corpus_text("monoid"), [
        "peano_left", "peano_right", "peano_assoc", "maybe_left", "maybe_right",
        "maybe_assoc", "list_left", "list_right", "list_assoc"])
    record(3, not lists and not monoid,
           f"list props failing={lists}, monoid laws failing={monoid}")


# 4 -------------------------------------------------------------------------------

def test_criterion_4_foldr():
    text = corpus_text("fold")
    bad = all_pass(text, ["foldr_univ", "fuse_base", "fuse_step", "foldr_fusion"])
    record(4, not bad, f"fold props failing={bad}")


# 5 -------------------------------------------------------------------------------

def test_criterion_5_lambda_reasoning():
    text = corpus_text("lambda")
    with_expl = verdict_of(text, "pf_id_id")
    bare = replace_once(text, "? (\\x -> id x =. x ** QED) ", "")
    without_expl = verdict_of(bare, "pf_id_id")
    alpha = verdict_of(text, "reader_alpha")
    starved = verdict_of(text, "reader_alpha", Config(instance_budget=0))
    ok = (with_expl == "PASS" and without_expl == "FAIL" and alpha == "PASS"
          and starved in ("UNKNOWN", "FAIL"))
    record(5, ok, f"pf_id_id {with_expl}, without explanation {without_expl}; "
                  f"reader_alpha {alpha}, with --instance-budget 0 {starved}")


# 6 -------------------------------------------------------------------------------

def test_criterion_6_ackermann():
    bad = all_pass(corpus_text("ackermann"), ["ack_gt", "ack_up", "fMono", "ack_mono"])
    record(6, not bad, f"properties 2, 3, 4 failing={bad}")


# 7 -------------------------------------------------------------------------------

def eval_solve_agreement(n: int, seed: int = 2024) -> tuple[int, list[str]]:
    prog = PROGRAM
    env = LogicEnv.for_program(prog)
    rng = random.Random(seed)
    disagree = []
    for _ in range(n):
        src = bool_expr(rng, 4)
        e, _ = annotate_expr(parse_expr(src, prog.datas), {}, prog, TBool())
        r = evaluate(e)
        assert isinstance(r, Value), (src, r)
        b = r.expr == BoolLit(True)
        p = translate(e, {}, env)
        pos = isinstance(solve(strengthen(VC(PTRUE, p), env)), Valid)
        neg = isinstance(solve(strengthen(VC(PTRUE, PNot(p)), env)), Valid)
        if (pos, neg) != (b, not b):
            disagree.append(src)
    return n, disagree


def test_criterion_7_translation_correctness():
    n, disagree = eval_solve_agreement(1000)
    record(7, not disagree, f"{n} random boolean expressions, {len(disagree)} disagreements")


# 8 -------------------------------------------------------------------------------

def corpus_external_agreement(z3: str) -> tuple[int, list[str]]:
    count, bad = 0, []
    with tempfile.TemporaryDirectory() as tmp:
        for f in CORPUS_FILES:
            report = check_source(f.read_text(), f.name)
            for k, o in enumerate(report.obligations):
                if o.vc is None:
                    continue
                path = Path(tmp) / f"{f.stem}.{k}.smt2"
                path.write_text(emit_smtlib2(o.vc))
                theirs = run_external(z3, path)
                count += 1
                if type(theirs) is not type(o.verdict):
                    bad.append(f"{f.name}:{o.definition}:{o.rule}")
    return count, bad


def test_criterion_8_solver_suites():
    euf_bad = [f for f, sig, want in EUF_CASES if verdict(f, sig) != want]
    for prop, want in DATATYPE_CASES:
        args = " ".join(f"a{i}" for i in range(prop.count("->")))
        if verdict_of(f"prop p :: {prop};\np {args} = trivial;\n", "p") != want:
            euf_bad.append(prop)
    lia_bad = [f for f, want in LIA_CASES if verdict(f, LI) != want]
    euf_n, lia_n = len(EUF_CASES) + len(DATATYPE_CASES), len(LIA_CASES)
    z3 = shutil.which("z3")
    if z3 is None:
        ext = "external agreement skipped (no z3 on PATH)"
        ext_bad: list[str] = []
    else:
        n, ext_bad = corpus_external_agreement(z3)
        ext = f"z3 agrees on {n - len(ext_bad)}/{n} corpus VCs"
    ok = not euf_bad and not lia_bad and euf_n >= 30 and lia_n >= 30 and not ext_bad
    record(8, ok, f"{euf_n} EUF cases ({len(euf_bad)} wrong), {lia_n} LIA cases "
                  f"({len(lia_bad)} wrong); {ext}")


# 9 -------------------------------------------------------------------------------

TERMINATION_RULES = ("Termination", "NonDecreasingCall", "NoUsableMetric")

NONTERMINATING = """
reflect loop :: n:Nat -> Int;
loop n = loop n;

let ping :: n:Nat -> Int;
ping n = if n == 0 then 0 else pong n;
let pong :: n:Nat -> Int;
pong n = ping (n + 1);
"""


def termination_statuses(text: str, name: str) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {}
    for o in check_source(text).obligations:
        if o.definition == name and o.rule in TERMINATION_RULES:
            out.setdefault(o.rule, set()).add(o.status)
    return out


def test_criterion_9_termination():
    accepted = {}
    for f, name in [("fib", "fib"), ("peano", "add"), ("lists", "++"), ("fold", "foldr")]:
        s = termination_statuses(corpus_text(f), name)
        accepted[name] = bool(s.get("NonDecreasingCall")) and all(v == {"PASS"}
                                                                  for v in s.values())
    rejected = {}
    for name in ("loop", "ping", "pong"):
        s = termination_statuses(NONTERMINATING, name)
        rejected[name] = "FAIL" in s.get("NonDecreasingCall", set())
    ok = all(accepted.values()) and all(rejected.values())
    record(9, ok, f"accepted {sorted(n for n, v in accepted.items() if v)}, "
                  f"rejected with NonDecreasingCall {sorted(n for n, v in rejected.items() if v)}")


# 10 ------------------------------------------------------------------------------

SPOT_CHECKS = [("fib", "fibUp", 0, 9), ("fib", "fibMono", 0, 10), ("ackermann", "ack_gt", 0, 2),
               ("ackermann", "ack_up", 0, 2), ("ackermann", "ack_mono", 0, 2)]


def test_criterion_10_semantic_validity():
    rng = random.Random(10)
    failures = []
    for f, name, lo, hi in SPOT_CHECKS:
        text = corpus_text(f)
        assert verdict_of(text, name) == "PASS"
        p = parse_file(text)
        for _ in range(100):
            sub = sample_args(p, name, rng, lo, hi)
            if not prop_holds(p, name, sub):
                failures.append((name, {k: v.value for k, v in sub.items()}))
    record(10, not failures, f"{len(SPOT_CHECKS)} props x 100 samples, "
                             f"{len(failures)} counterexamples")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
