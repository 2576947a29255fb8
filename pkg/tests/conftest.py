import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Collect a ``PASS``/``FAIL`` line for the terminal summary, then assert."""

    def _record(name, passed, detail):
        ACCEPTANCE_LINES.append(f"{name} {'PASS' if passed else 'FAIL'}  {detail}")
        print(ACCEPTANCE_LINES[-1])
        assert passed, f"{name}: {detail}"

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
