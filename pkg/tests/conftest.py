import numpy as np
import pytest

from ota_consensus.network import NetworkTopology, PathLossParams, generate_topology

REFERENCE = PathLossParams(antenna_gain_db=3.0, path_loss_exponent=4.0, ref_distance=10.0, shadowing_std_db=7.0)


def reference_topology(seed):
    return generate_topology(9, 300.0, 20.0, REFERENCE, np.random.default_rng(seed))


def make_topology(beta):
    beta = np.asarray(beta, dtype=float)
    n = beta.shape[0]
    positions = np.column_stack([np.arange(n) * 50.0, np.zeros(n)])
    return NetworkTopology(positions, beta, 0.0, 50.0 * n)


def random_symmetric_beta(rng, n, low=1e-3, high=1.0):
    b = rng.uniform(low, high, size=(n, n))
    b = np.triu(b, 1)
    return b + b.T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def topo9():
    return reference_topology(7)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
