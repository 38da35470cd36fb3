import pytest

# (criterion number, passed, detail), filled in by test_acceptance.py
ACCEPTANCE = []


@pytest.fixture
def record():
    def _record(n, ok, detail):
        ACCEPTANCE.append((n, bool(ok), detail))
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
