import contextlib
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE: dict = {}


@contextlib.contextmanager
def criterion(number: int, text: str):
    """Record one acceptance line; the assertion outcome decides PASS/FAIL."""
    ok = False
    try:
        yield
        ok = True
    finally:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text}"
        ACCEPTANCE[number] = line
        print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])


@pytest.fixture(scope="session")
def rb85():
    from protosim.params import preset

    return preset("rb85").params
