import sys

import pytest

from leaky.domain import preset
from leaky.mollifier import Mollifier


@pytest.fixture(scope="session")
def unit():
    return preset("unit")


@pytest.fixture(scope="session")
def intro3():
    return preset("intro", truncation=3)


@pytest.fixture(scope="session")
def algebraic():
    return preset("algebraic")


@pytest.fixture(scope="session")
def two_step():
    return preset("two_step")


@pytest.fixture(scope="session")
def moll():
    return Mollifier(0.1)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
