import time

import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion: measured outcome plus runtime against its budget."""
    start = time.perf_counter()

    def record(name, passed, detail, budget=None, elapsed=None):
        # work done in shared fixtures is timed there and passed in as ``elapsed``
        if elapsed is None:
            elapsed = time.perf_counter() - start
        ok = bool(passed) and (budget is None or elapsed <= budget)
        limit = "no runtime budget" if budget is None else f"budget {budget:g} s"
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail} [{elapsed:.1f} s, {limit}]"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.line(line)
