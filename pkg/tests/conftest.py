import pytest

from multigrasp.kinematics import load_hand
from multigrasp.objects import load_catalog
from multigrasp.reachability import build_reachability_map

CRITERIA: list[str] = []


@pytest.fixture(scope="session")
def human():
    return load_hand("human")


@pytest.fixture(scope="session")
def allegro():
    return load_hand("allegro")


@pytest.fixture(scope="session")
def human_map(human):
    return build_reachability_map(human)


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
