import re
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from lamr.cli import main
from lamr.driver import check_source

from conftest import CORPUS, CORPUS_FILES, corpus_text

LINE = re.compile(r"^(PASS|FAIL|UNKNOWN) \S+:\d+:\d+-\d+:\d+ \[\w[\w-]*\] ")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, text, name="t.rfl"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_passing_file_exits_zero(capsys):
    code, out, _ = run(capsys, "check", str(CORPUS / "fib.rfl"))
    assert code == 0
    lines = out.splitlines()
    assert lines and all(LINE.match(l) and l.startswith("PASS") for l in lines)


def test_failing_file_exits_one(capsys, tmp_path):
    f = write(tmp_path, "prop p :: x:Int -> {x + 1 > 10};\np x = trivial;\n")
    code, out, _ = run(capsys, "check", f)
    assert code == 1
    head, *rest = out.splitlines()
    assert LINE.match(head) and head.startswith("FAIL") and " goal: " in head
    assert any(l.startswith("  model: x = ") for l in rest)


def test_parse_error_exits_two(capsys, tmp_path):
    f = write(tmp_path, "reflect f :: Int -> Int\nf x = 1;\n")
    code, out, _ = run(capsys, "check", f)
    assert code == 2 and out.startswith("ERROR ") and "[SyntaxError]" in out


def test_missing_file_exits_two(capsys, tmp_path):
    code, out, _ = run(capsys, "check", str(tmp_path / "nope.rfl"))
    assert code == 2 and "IOError" in out


def test_error_outranks_failure(capsys, tmp_path):
    bad = write(tmp_path, "prop p :: {1 = 2};\np = trivial;\n", "a.rfl")
    broken = write(tmp_path, "prop p ::\n", "b.rfl")
    code, out, _ = run(capsys, "check", bad, broken)
    assert code == 2
    assert out.index("a.rfl") < out.index("b.rfl")


def test_unknown_line_has_reason(capsys):
    code, out, _ = run(capsys, "check", "--instance-budget", "0", str(CORPUS / "lambda.rfl"))
    assert code == 1
    unknown = [l for l in out.splitlines() if l.startswith("UNKNOWN")]
    assert unknown and all(" reason: " in l and " goal: " in l for l in unknown)


def test_termination_failure_shows_metric(capsys, tmp_path):
    f = write(tmp_path, "reflect loop :: n:Nat -> Int;\nloop n = loop n;\n")
    code, out, _ = run(capsys, "check", f)
    assert code == 1
    assert "[NonDecreasingCall]" in out and "note: metric [n]" in out


def test_emit_smt_writes_one_file_per_vc(capsys, tmp_path):
    out_dir = tmp_path / "smt"
    code, out, _ = run(capsys, "check", "--emit-smt", str(out_dir), str(CORPUS / "lists.rfl"))
    assert code == 0
    files = sorted(out_dir.iterdir())
    report = check_source(corpus_text("lists"), "lists.rfl")
    assert len(files) == sum(o.vc is not None for o in report.obligations) > 0
    assert all(f.name.startswith("lists.rfl.") and f.suffix == ".smt2" for f in files)
    text = files[0].read_text()
    assert "(check-sat)" in text


def test_output_is_deterministic(capsys):
    paths = [str(p) for p in CORPUS_FILES[:3]]
    first = run(capsys, "check", *paths)
    second = run(capsys, "check", *paths)
    assert first == second


def test_verbose_prints_vcs(capsys):
    _, out, _ = run(capsys, "check", "-v", str(CORPUS / "fib.rfl"))
    assert "  decls:" in out and "  goal: " in out


@pytest.mark.skipif(shutil.which("z3") is None, reason="z3 not installed")
def test_external_solver(capsys):
    code, out, _ = run(capsys, "check", "--solver", "external:z3", str(CORPUS / "peano.rfl"))
    lines = out.splitlines()
    assert code == 0 and lines and all(l.startswith("PASS") for l in lines)


def test_bad_solver_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        main(["check", "--solver", "magic", str(CORPUS / "fib.rfl")])
    assert err.value.code == 2
    assert "builtin or external" in capsys.readouterr().err


def test_negative_budget_rejected(capsys):
    with pytest.raises(SystemExit):
        main(["check", "--instance-budget", "-1", str(CORPUS / "fib.rfl")])


# -- eval ----------------------------------------------------------------------

def test_eval_value(capsys):
    code, out, _ = run(capsys, "eval", str(CORPUS / "fib.rfl"), "fib 10")
    assert (code, out) == (0, "55\n")


def test_eval_list(capsys):
    code, out, _ = run(capsys, "eval", str(CORPUS / "lists.rfl"), "map (\\x -> x * 2) [1, 2]")
    assert code == 0 and out.strip() == "[2, 4]"


def test_eval_nested_values(capsys, tmp_path):
    f = write(tmp_path, "data Maybe a = Nothing | Just a;\n")
    code, out, _ = run(capsys, "eval", f, "Just [Just (-1), Nothing]")
    assert code == 0 and out.strip() == "Just [Just (-1), Nothing]"


def test_eval_out_of_fuel(capsys):
    code, out, _ = run(capsys, "eval", "--fuel", "10", str(CORPUS / "fib.rfl"), "fib 20")
    assert code == 1 and out.startswith("out of fuel")


def test_eval_stuck(capsys):
    code, out, _ = run(capsys, "eval", str(CORPUS / "fib.rfl"), "1 + True")
    assert code == 1 and out.startswith("stuck")


def test_eval_function_equality(capsys):
    code, out, _ = run(capsys, "eval", str(CORPUS / "fib.rfl"), "(\\x -> x) == (\\y -> y)")
    assert code == 1 and out.startswith("cannot compare functions")


def test_console_script():
    exe = shutil.which("lamr")
    cmd = [exe] if exe else [sys.executable, "-m", "lamr.cli"]
    r = subprocess.run(cmd + ["eval", str(CORPUS / "peano.rfl"), "add (S Z) (S Z)"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "S (S Z)"


DEMOS = Path(__file__).resolve().parent.parent / "demos"


def test_demos_behave_as_narrated(capsys):
    code, _, _ = run(capsys, "check", str(DEMOS / "reverse.rfl"))
    assert code == 0
    code, out, _ = run(capsys, "check", str(DEMOS / "mistakes.rfl"))
    failed = {l.split("[")[1].split("]")[0] + ":" + l.split(":")[1]
              for l in out.splitlines() if l.startswith("FAIL")}
    assert code == 1 and failed == {"Sub-Base:8", "Sub-Base:15", "NonDecreasingCall:19"}
