import numpy as np
import pytest

from maxentsd.basis import MomentBasis
from maxentsd.quadrature import SupportSpec, build_rule
from maxentsd.solver import fit

LAPLACE_ALPHAS = (0.5, 1.0, 2.0)
LAPLACE_D = tuple(1.0 / (1.0 + a) for a in LAPLACE_ALPHAS)

ACCEPTANCE_LINES = []


def record(number, title, ok, detail, seconds):
    """Store one pass/fail line for the end-of-run acceptance summary."""
    status = "PASS" if ok else "FAIL"
    line = f"[{status}] criterion {number:2d} {title}: {detail} ({seconds:.2f} s)"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


@pytest.fixture(scope="session")
def unit():
    return SupportSpec.finite(0.0, 1.0)


@pytest.fixture(scope="session")
def unit_rule(unit):
    return build_rule(unit)


@pytest.fixture(scope="session")
def linear():
    return MomentBasis.powers([1])


@pytest.fixture(scope="session")
def uniform_model(unit, linear):
    return fit([0.5], linear, unit)


@pytest.fixture(scope="session")
def d03_model(unit, linear):
    return fit([0.3], linear, unit)


@pytest.fixture(scope="session")
def laplace_support():
    return SupportSpec.half_line(0.0, 1.0, "exponential")


@pytest.fixture(scope="session")
def laplace_basis():
    return MomentBasis.exponentials(LAPLACE_ALPHAS)


@pytest.fixture(scope="session")
def laplace_model(laplace_basis, laplace_support):
    return fit(LAPLACE_D, laplace_basis, laplace_support)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
