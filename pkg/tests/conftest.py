import functools

import pytest

from rkscars.lattice import build_geometry, enumerate_gauge_sector
from rkscars.operators import build_hamiltonian, diagonalize
from rkscars.scar_search import scan_all


@functools.lru_cache(maxsize=None)
def sector(Lx, Ly):
    return enumerate_gauge_sector(build_geometry(Lx, Ly))


@functools.lru_cache(maxsize=None)
def spectrum(Lx, Ly, coupling=1.0):
    return diagonalize(build_hamiltonian(sector(Lx, Ly), coupling))


@functools.lru_cache(maxsize=None)
def scan(Lx, Ly):
    return scan_all(spectrum(Lx, Ly), sre=Lx * Ly * 2 <= 16)


@pytest.fixture
def sector22():
    return sector(2, 2)


@pytest.fixture
def sector42():
    return sector(4, 2)


@pytest.fixture
def scan22():
    return scan(2, 2)


@pytest.fixture
def scan42():
    return scan(4, 2)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
