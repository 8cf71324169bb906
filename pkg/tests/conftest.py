import csv
import pathlib

import numpy as np
import pytest

from fblbeam.rate import make_regime
from fblbeam.system import ChannelSet, Geometry, sample_channels

DATA = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def regime():
    return make_regime(1e-5, 128, 256)


@pytest.fixture(scope="session")
def table1_rows():
    with open(DATA / "table1_reference.csv") as fh:
        return list(csv.DictReader(fh))


def random_channels(seed, k_users=4, n_tx=8, sigma2=1.0):
    return sample_channels(Geometry(), k_users, n_tx, np.random.default_rng(seed), sigma2=sigma2)


def orthonormal_channels(gains, n_tx=None, seed=0):
    """Mutually orthogonal channels with ``||h_bar_k||^2 = gains[k]``."""
    gains = np.asarray(gains, dtype=float)
    k = gains.size
    n_tx = n_tx or k
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_tx, n_tx)) + 1j * rng.standard_normal((n_tx, n_tx))
    q, _ = np.linalg.qr(z)
    return ChannelSet.from_normalized(np.sqrt(gains)[:, None] * q[:, :k].T)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
