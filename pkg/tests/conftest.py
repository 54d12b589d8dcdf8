import numpy as np
import pytest
from hypothesis import settings

from mobility_ldp.potentials import CellGeometry, Potential

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")


@pytest.fixture
def cell2():
    return CellGeometry(2, 1.0)


@pytest.fixture
def cell1():
    return CellGeometry(1, 1.0)


@pytest.fixture
def energy4():
    return Potential.energy(1.0, 4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for the acceptance summary, then assert."""

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
