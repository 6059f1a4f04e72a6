from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cubelab.group2 import cyclic, make_canonical, product  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"

CORPUS = {
    "D1(Z2)": cyclic(2),
    "D1(Z4)": cyclic(4),
    "D1(Z3)": cyclic(3),
    "Z_2,1": make_canonical(2, 1),
    "Z_2,2": make_canonical(2, 2),
    "Z_3,1": make_canonical(3, 1),
    "Z_2,1 x Z_2,2": product(make_canonical(2, 1), make_canonical(2, 2)),
}

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def corpus():
    return CORPUS


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
