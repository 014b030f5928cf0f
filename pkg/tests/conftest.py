from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from carpetlab.geometry import WeightConfig

settings.register_profile("carpetlab", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("carpetlab")


@pytest.fixture(params=[Fraction(1, 2), Fraction(1), Fraction(2)], ids=["rho=1/2", "rho=1", "rho=2"])
def cfg(request):
    return WeightConfig(request.param)


@pytest.fixture
def cfg1():
    return WeightConfig(1)


@pytest.fixture
def cfg2():
    return WeightConfig(2)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n, passed, text in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {n:>2}: {text}")
