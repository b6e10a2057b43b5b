"""Shared pytest wiring: a summary section for the acceptance criteria.

Every acceptance test maps to one shipped guarantee; the terminal
summary repeats each one as a single PASS/FAIL line so the outcome is
readable without scrolling through the verbose listing.
"""

from __future__ import annotations

import pytest

_acceptance_results: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.fspath.basename != "test_acceptance.py":
        return
    doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
    if report.when == "call":
        _acceptance_results[item.name] = (doc, report.outcome)
    elif report.when == "setup" and report.outcome != "passed":
        _acceptance_results[item.name] = (doc, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance_results):
        doc, outcome = _acceptance_results[name]
        word = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{word}  {doc}")
