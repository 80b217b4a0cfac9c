"""Shared pytest plumbing.

Acceptance tests register a one-line verdict via ``record_criterion``;
the lines are replayed after the test summary so they stay visible even
when pytest captures stdout.
"""

from __future__ import annotations

_CRITERION_LINES: list[str] = []


def record_criterion(line: str) -> None:
    _CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in _CRITERION_LINES:
        terminalreporter.write_line(line)
