import os
import sys

# keep POT from importing heavyweight array backends during collection
for _b in ("PYTORCH", "TENSORFLOW", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_b}", "1")

sys.path.insert(0, os.path.dirname(__file__))

import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one acceptance line: ``verdict(number, passed, detail, seconds)``; printed at session end."""

    def record(number, passed, detail, seconds):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}  ({seconds:.1f} s)"
        _VERDICTS.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
