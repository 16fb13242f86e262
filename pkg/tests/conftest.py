"""Shared pytest plumbing: the acceptance scorecard.

Acceptance tests record one ``criterion NN [PASS|FAIL]`` line each through
the ``scorecard`` fixture; the collected block is echoed in the terminal
summary so the complete scorecard is visible on every run, not just the
captured output of failing tests.
"""

from __future__ import annotations

import pytest


def pytest_configure(config):
    config._scorecard_lines = []


@pytest.fixture
def scorecard(request):
    """Record (and print) one acceptance-criterion result line."""

    def add(tag: str, ok: bool, detail: str) -> None:
        line = f"criterion {tag:>3s} [{'PASS' if ok else 'FAIL'}] {detail}"
        print(line)
        request.config._scorecard_lines.append(line)

    return add


def pytest_terminal_summary(terminalreporter):
    lines = getattr(terminalreporter.config, "_scorecard_lines", [])
    if lines:
        terminalreporter.section("acceptance scorecard")
        for line in lines:
            terminalreporter.write_line(line)
