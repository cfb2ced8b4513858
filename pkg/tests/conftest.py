"""Shared fixtures and the acceptance summary printed after the run."""
from __future__ import annotations

import pathlib

import pytest

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

# criterion number -> [title, passed, details]
_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.fixture
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when != "call" and rep.passed:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, [title, True, []])
    entry[1] = entry[1] and rep.passed
    if rep.when == "call":
        entry[2].extend(f"{k}={v}" for k, v in item.user_properties)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, details = _CRITERIA[number]
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {title}"
        if details:
            line += "  [" + ", ".join(details) + "]"
        tr.write_line(line)

