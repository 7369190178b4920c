import numpy as np
import pytest
from hypothesis import settings

from pflattice import group_even_odd, heisenberg_random_field

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def heis4():
    return heisenberg_random_field(4, 1.0, 42)


@pytest.fixture
def heis6():
    return heisenberg_random_field(6, 1.0, 42)


@pytest.fixture
def even_odd(heis4):
    return group_even_odd(heis4)


def random_hermitian(rng, dim, norm=None):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = (a + a.conj().T) / 2
    if norm is not None:
        h *= norm / np.linalg.norm(h, 2)
    return h


def random_unitary(rng, dim):
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return q * (np.diag(r) / abs(np.diag(r)))
