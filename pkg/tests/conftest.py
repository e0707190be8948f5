import os

import pytest
from hypothesis import HealthCheck, settings

from leakscope.analysis import load_corpus

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# Filled by tests/test_acceptance.py; one line per criterion.
ACCEPTANCE_LINES: dict = {}


@pytest.fixture(scope="session")
def alg1():
    return load_corpus("alg1")


@pytest.fixture(scope="session")
def alg2():
    return load_corpus("alg2")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
