from __future__ import annotations

import sys
from contextlib import contextmanager
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"

# criterion number -> (title, passed)
_criteria: dict[int, tuple[str, bool]] = {}


@contextmanager
def _record(number: int, title: str):
    try:
        yield
    except BaseException:
        _criteria[number] = (title, False)
        print(f"criterion {number} ({title}): FAIL")
        raise
    _criteria[number] = (title, True)
    print(f"criterion {number} ({title}): PASS")


@pytest.fixture
def criterion():
    return _record


@pytest.fixture
def scenarios_dir() -> Path:
    return SCENARIOS


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"criterion {number} ({title}): {'PASS' if ok else 'FAIL'}")
