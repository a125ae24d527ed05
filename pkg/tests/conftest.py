"""Shared pytest plumbing.

The acceptance tests record one human-readable line per criterion; the
terminal-summary hook replays them after the run so the verdicts are
visible without -s.
"""

import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion_report():
    """Callable: criterion_report(number, name, passed, detail)."""

    def record(number: int, name: str, passed: bool, detail: str) -> None:
        verdict = "PASS" if passed else "FAIL"
        line = f"[criterion {number}] {name}: {verdict} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
