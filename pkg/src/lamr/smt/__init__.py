"""Validity checking for verification conditions."""
from __future__ import annotations

import tempfile
from pathlib import Path

from ..logic import VC, query, slice_vc
from .smtlib import emit_smtlib2, run_external
from .solver import BRANCH_BUDGET, Invalid, Unknown, Valid, check_sat

Verdict = Valid | Invalid | Unknown


def solve(vc: VC, budget: int = BRANCH_BUDGET, solver: str = "builtin") -> Verdict:
    """Validity of ``instances /\\ hyp => goal``.

    ``solver`` is ``builtin`` or ``external:<path>``.  A VC whose instance
    generation ran out of budget can still come back Valid, but any other
    verdict is reported as Unknown since the missing instances might matter.
    """
    if solver == "builtin":
        verdict = check_sat(query(slice_vc(vc)), budget)
        if not isinstance(verdict, Valid):
            verdict = check_sat(query(vc), budget)
    elif solver.startswith("external:"):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "vc.smt2"
            path.write_text(emit_smtlib2(vc))
            verdict = run_external(solver.split(":", 1)[1], path)
    else:
        raise ValueError(f"unknown solver mode {solver!r}")
    if vc.budget_hit and not isinstance(verdict, Valid):
        return Unknown("InstanceBudgetExceeded")
    return verdict


__all__ = ["Verdict", "Valid", "Invalid", "Unknown", "solve", "emit_smtlib2", "BRANCH_BUDGET"]
