"""Pytest wiring; importable builders live in support.py."""

from support import ACCEPTANCE_LINES, rng  # noqa: F401  registers the fixture


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
