"""Checking whole files and rendering the results.

This is the layer shared by the command line and the tests: it parses a
file against the prelude, runs the checker with the prelude trusted, maps
character offsets to line/column positions and formats one line per
obligation.
"""
from __future__ import annotations

import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .checker import Config, Obligation, check_obligations
from .core import Program, Span
from .evaluator import DEFAULT_FUEL
from .parser import ParseError, load_prelude, parse_program
from .shapes import ShapeError
from .smt import Unknown, emit_smtlib2


@dataclass(frozen=True)
class RunConfig:
    paths: tuple[str, ...]
    fuel: int = DEFAULT_FUEL
    pool: int = Config.pool
    instance_budget: int = Config.instance_budget
    branch_budget: int = Config.branch_budget
    solver: str = "builtin"
    emit_smt: str | None = None
    verbose: bool = False

    def checker_config(self) -> Config:
        return Config(self.pool, self.instance_budget, self.branch_budget, self.solver)


@dataclass
class FileReport:
    path: str
    text: str
    obligations: list[Obligation] = field(default_factory=list)
    error: str | None = None  # a parse or I/O error, already rendered

    @property
    def ok(self) -> bool:
        return self.error is None and all(o.status == "PASS" for o in self.obligations)


def prelude_names() -> list[str]:
    pre = load_prelude()
    return [d.name for d in pre.defs] + [m.name for m in pre.measures]


def parse_file(text: str) -> Program:
    """The prelude followed by the declarations of ``text``."""
    return load_prelude().extend(parse_program(text))


def check_source(text: str, path: str = "<input>", config: Config = Config()) -> FileReport:
    report = FileReport(path, text)
    try:
        program = parse_file(text)
    except (ParseError, ShapeError) as err:
        where = location(text, err.span) if err.span is not None else "?"
        report.error = f"ERROR {path}:{where} [{err.kind}] {err}"
        return report
    obs = check_obligations(program, config, trusted=prelude_names())
    report.obligations = sorted((replace(o, file=path) for o in obs), key=_order)
    return report


def check_file(path: str, config: Config = Config()) -> FileReport:
    try:
        text = Path(path).read_text()
    except OSError as err:
        return FileReport(path, "", error=f"ERROR {path} [IOError] {err.strerror}")
    return check_source(text, path, config)


def _order(o: Obligation) -> tuple[int, int]:
    return (o.span.start, o.span.end) if o.span is not None else (-1, -1)


# -- positions -----------------------------------------------------------------


def line_col(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def location(text: str, span: Span | None) -> str:
    if span is None:
        return "?"
    l1, c1 = line_col(text, span.start)
    l2, c2 = line_col(text, max(span.start, span.end))
    return f"{l1}:{c1}-{l2}:{c2}"


# -- rendering -----------------------------------------------------------------


def render_diagnostic(o: Obligation, text: str = "", verbose: bool = False) -> str:
    """One status line, then indented detail lines for anything not passing."""
    where = f"{o.file}:{location(text, o.span)}"
    head = f"{o.status} {where} [{o.rule}]"
    if o.status == "PASS":
        lines = [f"{head} {o.definition}"]
    elif o.status == "UNKNOWN":
        reason = o.verdict.reason if isinstance(o.verdict, Unknown) else o.message
        lines = [f"{head} reason: {reason} goal: {o.goal}"]
    else:
        lines = [f"{head} goal: {o.goal}" if o.vc is not None else f"{head} {o.definition}"]
    if o.status != "PASS":
        if o.message:
            lines.append(f"  note: {o.message}")
        for name, value in o.model.items():
            if not _GENERATED.match(name):
                lines.append(f"  model: {name} = {_value(value)}")
    if verbose and o.vc is not None:
        lines += ["  " + line for line in o.render_vc().splitlines()]
    return "\n".join(lines)


# checker temporaries (t'3, _s2'1) and renamed binders (xs'1)
_GENERATED = re.compile(r"^_|.*'\d+$")


def _value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


# -- emitting VCs --------------------------------------------------------------


def _file_part(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_'-]", lambda m: f"%{ord(m.group()):02x}", name)


def emit_files(report: FileReport, out: str) -> list[Path]:
    """Write each obligation's VC as ``<file>.<prop>.<k>.smt2``; k counts from 1."""
    base = Path(out)
    base.mkdir(parents=True, exist_ok=True)
    counts: dict[str, int] = {}
    written = []
    stem = Path(report.path).name
    for o in report.obligations:
        if o.vc is None:
            continue
        k = counts[o.definition] = counts.get(o.definition, 0) + 1
        path = base / f"{stem}.{_file_part(o.definition)}.{k}.smt2"
        path.write_text(emit_smtlib2(o.vc))
        written.append(path)
    return written


# -- running a batch -----------------------------------------------------------


def _run_one(path: str, cfg: RunConfig) -> tuple[str, bool]:
    report = check_file(path, cfg.checker_config())
    if report.error is not None:
        return report.error, False
    if cfg.emit_smt:
        emit_files(report, cfg.emit_smt)
    lines = [render_diagnostic(o, report.text, cfg.verbose) for o in report.obligations]
    return "\n".join(lines), report.ok


def run(cfg: RunConfig) -> tuple[int, str]:
    """Check every file; the exit status is 0 exactly when everything passed.

    Files are checked in parallel, but the report lists them in the order
    given, each file's obligations ordered by position.
    """
    if len(cfg.paths) > 1:
        with ProcessPoolExecutor() as ex:
            results = list(ex.map(_run_one, cfg.paths, [cfg] * len(cfg.paths)))
    else:
        results = [_run_one(p, cfg) for p in cfg.paths]
    text = "\n".join(r for r, _ in results if r)
    errors = any(r.startswith("ERROR") for r, _ in results)
    status = 0 if all(ok for _, ok in results) else 2 if errors else 1
    return status, text
