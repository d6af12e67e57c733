from pathlib import Path

import numpy as np
import pytest

from floorop.condexp import EnsembleBackend, LatticeBackend, RegressionSpec
from floorop.oracles import lookup, read_fixtures
from floorop.paths import TimeGrid, simulate_paths

FIXTURES = Path(__file__).parent / "fixtures" / "oracles.csv"

# one line per acceptance criterion, filled by test_acceptance and echoed at the end
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])


@pytest.fixture(scope="session")
def oracle_table():
    return read_fixtures(FIXTURES)


@pytest.fixture(scope="session")
def frozen(oracle_table):
    def get(label, **params):
        v = lookup(oracle_table, label, params)
        assert v is not None, f"no frozen oracle for {label} {params}"
        return v
    return get


def lattice(N, T=1.0):
    return LatticeBackend(TimeGrid(T, N))


def ensemble(N, M, seed=0, T=1.0, d=1, spec=None):
    return EnsembleBackend(simulate_paths(TimeGrid(T, N), d, M, seed), spec or RegressionSpec())


def prefix_nodes(i):
    """Recombining-lattice node of every path prefix at step i (the number of up moves)."""
    return np.array([bin(p).count("1") for p in range(2**i)])
