import numpy as np
import pytest

from app.core.operators import ket, pauli, projector, sigma_minus
from app.heom.modes import Detection, ModeSpec


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow studies")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def jc_operators():
    """H_A, L and the excited initial state of the undriven JC atom."""
    return 0.5 * pauli("z"), sigma_minus(), projector(ket(2, 0))


@pytest.fixture
def jc_mode():
    return ModeSpec(g=2.0, delta=1.0, kappa=3.0, coupling_op=sigma_minus(), detection=Detection.HOMODYNE)
