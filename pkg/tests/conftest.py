import numpy as np
import pytest

from bnlslab.groundstate import solve_ground_state
from bnlslab.spectral import make_grid, physical_field

# Acceptance tests append (criterion, ok, detail) here; the terminal summary
# prints one line per criterion.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {crit}: {detail}")


@pytest.fixture(scope="session")
def prm2():
    return make_grid(2, 9, 256, 16)


@pytest.fixture(scope="session")
def gs2(prm2):
    return solve_ground_state(prm2)


@pytest.fixture(scope="session")
def prm_small():
    return make_grid(2, 9, 64, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_smooth_field(prm, rng, bandwidth=None):
    """Random complex field with a Gaussian spectral envelope."""
    from bnlslab.spectral import wavenumbers

    k2 = wavenumbers(prm).k2
    bw = (prm.n / (8 * prm.L)) ** 2 if bandwidth is None else bandwidth
    shape = prm.shape
    coeff = (rng.normal(size=shape) + 1j * rng.normal(size=shape)) * np.exp(-k2 / (2 * bw))
    return physical_field(np.fft.ifftn(coeff, norm="ortho"), prm)
