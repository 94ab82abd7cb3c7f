import pytest

from mpnav.bench import Config, generate_library

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def library():
    """Teleop-generated library under the default configuration (seed 0)."""
    return generate_library(Config())


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def report(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {number}. {title}" + (f": {detail}" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
