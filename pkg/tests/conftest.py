import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record one pass/fail line for the terminal summary."""
    def record(number: int, passed: bool, text: str, runtime: float, limit: float):
        ok = passed and runtime < limit
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {text} "
                                f"[{runtime:.1f} s, limit {limit:g} s]")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
