import pytest

from gtmlab.precision import working_context

ACCEPTANCE_LINES = []


@pytest.fixture
def ctx128():
    with working_context(128) as ctx:
        yield ctx


@pytest.fixture
def record():
    """Collect one PASS/FAIL line per acceptance criterion."""

    def _record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
