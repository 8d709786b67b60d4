import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line; the lines are echoed in the terminal summary."""

    def _report(criterion: str, measured, bound, passed: bool, note: str = "") -> bool:
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {criterion}: measured={measured} bound={bound}"
        if note:
            line += f" ({note})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
