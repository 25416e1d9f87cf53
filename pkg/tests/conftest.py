import numpy as np
import pytest

from quadtomo import rng

#: (criterion, passed, detail) lines collected by test_acceptance
ACCEPTANCE_LINES = []


@pytest.fixture
def gen():
    return rng.stream(20240601, "tests")


def variance_sigma(variance, n):
    """Standard error of a sample variance of n Gaussian draws."""
    return variance * np.sqrt(2.0 / n)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
