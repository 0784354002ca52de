import numpy as np
import pytest

from twophase import FinitePopulation, GenSpec, anderson_summary, generate_population

ACCEPTANCE_LINES: list[str] = []

ANDERSON_MEANS = (183.84, 185.72, 151.12)
ANDERSON_CVS = (0.0546, 0.0526, 0.0488)
ANDERSON_RHOS = (0.7108, 0.7346, 0.6932)


@pytest.fixture
def anderson():
    return anderson_summary()


@pytest.fixture
def tiny_population():
    """N=12 low-CV population used for enumeration checks."""
    spec = GenSpec(12, ANDERSON_MEANS, (0.03, 0.03, 0.03), ANDERSON_RHOS, seed=1)
    return generate_population(spec)


@pytest.fixture
def six_units():
    rng = np.random.default_rng(3)
    y = rng.uniform(10, 20, 6)
    x = y + rng.uniform(0, 3, 6)
    z = x + rng.uniform(0, 3, 6)
    return FinitePopulation(y, x, z, label="six")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
