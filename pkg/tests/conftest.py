from __future__ import annotations

import sys
from pathlib import Path

import pytest

from purifl.parser import parse, parse_file
from purifl.pipeline import CORPUS_DIR, corpus_programs

NANMINMAX = CORPUS_DIR / "nanminmax.ml0"
NANMINMAX_FAULT = CORPUS_DIR / "faults" / "nanminmax_fault.ml0"
FAULT_LINE = 27  # `if (!is_nan(a))` in max2


@pytest.fixture(scope="session")
def nanminmax():
    return parse_file(NANMINMAX)


@pytest.fixture(scope="session")
def nanminmax_fault():
    return parse_file(NANMINMAX_FAULT)


@pytest.fixture(scope="session")
def corpus():
    return {p.stem: parse_file(p) for p in corpus_programs()}


def src(text: str, file: str = "<test>"):
    return parse(text, file)


def stmt_on_line(program, line: int):
    return next(s for s in program.program_statements() if s.sid.line == line)


__all__ = ["NANMINMAX", "NANMINMAX_FAULT", "FAULT_LINE", "Path", "src", "stmt_on_line"]


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
