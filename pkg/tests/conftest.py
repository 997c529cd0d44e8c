from __future__ import annotations

import sys
from pathlib import Path

import pytest

from xebstat.precision import PrecisionContext

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def ctx() -> PrecisionContext:
    return PrecisionContext(256)


@pytest.fixture
def fast() -> PrecisionContext:
    return PrecisionContext(53)


# one PASS/FAIL line per acceptance criterion, collected by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
