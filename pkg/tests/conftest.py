import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from trimmedpd.densities import GrFamily
from trimmedpd.streams import stream

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng(request):
    return stream(1234, request.node.name)


@pytest.fixture(scope="session")
def fam05():
    return GrFamily(0.5)


def binomial_z(hits, n, p):
    return (hits - n * p) / np.sqrt(n * p * (1 - p))


# one line per acceptance criterion, shown after the test run
ACCEPTANCE: list[tuple[int, str]] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
