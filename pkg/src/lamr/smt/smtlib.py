"""SMT-LIB2 output for verification conditions, and an external-solver runner."""
from __future__ import annotations

import subprocess
from pathlib import Path

from ..logic import VC, declarations, query
from ..pred import S_BOOL, S_INT, SFun, Sort, quote, sort_of, subterms, to_sexpr
from .solver import Invalid, Unknown, Valid


def _sort_name(s: Sort) -> str:
    return str(s)


def _uninterpreted_sorts(vc: VC) -> list[str]:
    found: dict[str, None] = {}

    def visit(s: Sort) -> None:
        if isinstance(s, SFun):
            visit(s.arg)
            visit(s.res)
        if s not in (S_INT, S_BOOL):
            found[str(s)] = None

    for p in query(vc):
        for q in subterms(p):
            visit(sort_of(q))
            if hasattr(q, "args"):
                for a in q.args:
                    visit(sort_of(a))
    return sorted(found)


def emit_smtlib2(vc: VC) -> str:
    lines = ["(set-logic QF_UFLIA)"]
    lines += [f"(declare-sort {s} 0)" for s in _uninterpreted_sorts(vc)]
    for name, sig in vc.decls():
        if sig.startswith("("):
            args, res = sig[1:].split(") ")
            lines.append(f"(declare-fun {quote(name)} ({args}) {res})")
        else:
            lines.append(f"(declare-fun {quote(name)} () {sig})")
    for p in vc.instances:
        lines.append(f"(assert {to_sexpr(p)})")
    lines.append(f"(assert {to_sexpr(vc.hyp)})")
    lines.append(f"(assert (not {to_sexpr(vc.goal)}))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def run_external(solver: str, path: Path, timeout: float = 30.0) -> Valid | Invalid | Unknown:
    """Run ``solver path`` and read the verdict off the first output line."""
    try:
        out = subprocess.run([solver, str(path)], capture_output=True, text=True,
                             timeout=timeout).stdout
    except (OSError, subprocess.TimeoutExpired) as err:
        return Unknown(f"ExternalSolver: {err}")
    first = out.strip().splitlines()[0] if out.strip() else ""
    if first == "unsat":
        return Valid()
    if first == "sat":
        return Invalid({})
    return Unknown(f"ExternalSolver: {first or 'no output'}")
