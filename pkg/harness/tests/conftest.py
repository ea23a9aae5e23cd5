"""Pytest wiring; importable fixtures live in harness_support.py."""

from harness_support import ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("harness acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
