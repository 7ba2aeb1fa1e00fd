import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

SPECS = Path(__file__).resolve().parents[1] / "src" / "phifix" / "specs"

_ACCEPTANCE_LINES = []


@pytest.fixture
def specs_dir() -> Path:
    return SPECS


@pytest.fixture
def acceptance_log():
    def log(criterion: int, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion:>2}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
