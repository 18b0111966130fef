import os
import sys

import hypothesis
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from dimsheet.engine import eval_model  # noqa: E402
from dimsheet.fixtures import load_atw  # noqa: E402

hypothesis.settings.register_profile("default", max_examples=100, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def atw():
    return load_atw()


@pytest.fixture(scope="session")
def store100(atw):
    return eval_model(atw, {"Base Price": 100})


@pytest.fixture(scope="session")
def store140(atw):
    return eval_model(atw, {"Base Price": 140})


# acceptance criteria report: one line per criterion in the terminal summary

_criteria: dict[int, tuple[str, bool]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    passed = _criteria.get(number, (title, True))[1] and not report.failed
    if report.when == "call" or report.failed:
        _criteria[number] = (title, passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, passed = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {title}")
