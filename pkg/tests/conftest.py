import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sanovlab import (  # noqa: E402
    FiniteMeasure,
    Gaussian,
    IntervalSpace,
    Uniform,
    build_exhaustion,
    build_sequence,
)


@pytest.fixture(scope="session")
def line():
    return IntervalSpace()


@pytest.fixture(scope="session")
def unit():
    return IntervalSpace(0.0, 1.0)


@pytest.fixture(scope="session")
def gauss_seq(line):
    mu = Gaussian(0.0, 1.0)
    return build_sequence(line, build_exhaustion(mu, 6, line), 6)


@pytest.fixture(scope="session")
def unit_seq(unit):
    mu = Uniform(0.0, 1.0)
    return build_sequence(unit, build_exhaustion(mu, 4, unit), 4)


@pytest.fixture(scope="session")
def coin():
    return FiniteMeasure([0, 1], [Fraction(1, 2), Fraction(1, 2)])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
