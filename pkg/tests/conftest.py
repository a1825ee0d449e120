import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def record():
    """Log one acceptance verdict; the lines are repeated in the terminal summary."""
    def rec(number: int, ok: bool, title: str, detail: str) -> bool:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _LINES[number] = line
        print(line)
        return ok
    return rec


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_LINES):
            terminalreporter.write_line(_LINES[k])
