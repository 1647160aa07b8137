from __future__ import annotations

from pathlib import Path

import lamr

from lamr.checker import Config
from lamr.driver import check_source

CORPUS = Path(lamr.__file__).parent / "corpus"
CORPUS_FILES = sorted(CORPUS.glob("*.rfl"))


def corpus_text(name: str) -> str:
    return (CORPUS / f"{name}.rfl").read_text()


def statuses(text: str, config: Config = Config()) -> dict[str, set[str]]:
    """Definition name to the set of statuses of its obligations."""
    report = check_source(text, "t.rfl", config)
    assert report.error is None, report.error
    out: dict[str, set[str]] = {}
    for o in report.obligations:
        out.setdefault(o.definition, set()).add(o.status)
    return out


def verdict_of(text: str, name: str, config: Config = Config()) -> str:
    """PASS when every obligation of ``name`` passes, else FAIL or UNKNOWN."""
    s = statuses(text, config).get(name, set())
    assert s, f"no obligations for {name}"
    if s == {"PASS"}:
        return "PASS"
    return "FAIL" if "FAIL" in s else "UNKNOWN"


def replace_once(text: str, old: str, new: str) -> str:
    assert text.count(old) == 1, f"{old!r} occurs {text.count(old)} times"
    return text.replace(old, new)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
