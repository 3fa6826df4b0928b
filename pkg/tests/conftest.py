from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from slicer.smt import SolverSession

ROOT = Path(__file__).resolve().parent.parent
PROGRAMS = ROOT / "programs"

_acceptance_lines: list[str] = []


def record_acceptance(name: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    _acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


def pytest_collection_modifyitems(config, items):
    if shutil.which("z3") is None:
        skip = pytest.mark.skip(reason="z3 binary not on PATH")
        for item in items:
            if "session" in item.fixturenames:
                item.add_marker(skip)


@pytest.fixture(scope="module")
def session():
    s = SolverSession()
    yield s
    s.close()


@pytest.fixture(scope="session")
def program_text():
    def read(name: str) -> str:
        return (PROGRAMS / name).read_text()
    return read
