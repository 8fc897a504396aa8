"""Collects one PASS/FAIL line per acceptance criterion and prints the block
at the end of the run, so the verdicts survive pytest's output capture."""

from __future__ import annotations

ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
