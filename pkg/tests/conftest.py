"""Shared fixtures."""

import pytest

from uavmac.channel import UserLayout
from uavmac.scenario import Scenario

FOUR_USERS = (0.0, 800.0 / 3.0, 1600.0 / 3.0, 800.0)


@pytest.fixture(scope="session")
def two_users_100():
    return Scenario(UserLayout((0.0, 100.0)))


@pytest.fixture(scope="session")
def two_users_800():
    return Scenario(UserLayout((0.0, 800.0)))


@pytest.fixture(scope="session")
def four_users():
    return Scenario(UserLayout(FOUR_USERS))


#: ``PASS``/``FAIL`` lines from the acceptance checks, echoed after the run.
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
