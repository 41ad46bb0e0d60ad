import numpy as np
import pytest

from oldroyd_fem import build_space, build_unit_square_mesh


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: full acceptance-criteria runs (minutes)"
    )
    config.addinivalue_line("markers", "slow: long-running checks")


@pytest.fixture(scope="session")
def mesh4():
    return build_unit_square_mesh(4)


@pytest.fixture(scope="session")
def spaces_p2p0_n4(mesh4):
    return build_space(mesh4, "velocity-P2"), build_space(mesh4, "pressure-P0")


@pytest.fixture(scope="session")
def spaces_mini_n4(mesh4):
    return build_space(mesh4, "velocity-MINI"), build_space(mesh4, "pressure-P1")


@pytest.fixture
def rng():
    return np.random.default_rng(20240117)
