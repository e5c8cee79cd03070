import os
from importlib import resources

import pytest
from hypothesis import HealthCheck, settings

from taubisim.streams import build_universe, load_system

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = resources.files("taubisim") / "data"


def data(name: str) -> str:
    return str(DATA / name)


def system(name: str):
    return load_system(data(name))


@pytest.fixture(scope="session")
def shifted():
    return build_universe(system("shifted.strm"))


@pytest.fixture(scope="session")
def shifted_concat():
    return build_universe(system("shifted.strm"), closures=["concat"])


@pytest.fixture(scope="session")
def prefixed_concat():
    return build_universe(system("prefixed.strm"), closures=["concat"])


@pytest.fixture(scope="session")
def basics():
    return build_universe(system("basics.strm"))


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
