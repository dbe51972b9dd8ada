import numpy as np
import pytest

from app.core.errors import DimensionError, NotAStateError
from app.core.operators import HilbertSpaceLayout, coherent_spin_state_x, ket, kron_compose, projector
from app.measures.information import (
    information_gain,
    mutual_information,
    negativity,
    purity,
    trace_distance,
    von_neumann_entropy,
)
from app.measures.squeezing import spin_squeezing
from tests.helpers import random_density_matrix

PAIR = HilbertSpaceLayout.of(("1", 2), ("3", 2))


def bell():
    return projector((ket(4, 0) + ket(4, 3)) / np.sqrt(2))


def test_entropy_of_pure_and_maximally_mixed_states():
    assert von_neumann_entropy(projector(ket(3, 1))) == pytest.approx(0.0, abs=1e-12)
    assert von_neumann_entropy(np.eye(4, dtype=complex) / 4) == pytest.approx(np.log(4))


def test_entropy_rejects_non_states():
    with pytest.raises(NotAStateError):
        von_neumann_entropy(np.eye(2, dtype=complex))
    with pytest.raises(NotAStateError):
        von_neumann_entropy(np.diag([1.2, -0.2]).astype(complex))


def test_purity_and_trace_distance(rng):
    rho = random_density_matrix(3, rng)
    assert purity(projector(ket(3, 0))) == pytest.approx(1.0)
    assert purity(np.eye(2, dtype=complex) / 2) == pytest.approx(0.5)
    assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-12)
    # orthogonal pure states sit at distance 2 without the factor one half
    assert trace_distance(projector(ket(2, 0)), projector(ket(2, 1))) == pytest.approx(2.0)
    with pytest.raises(DimensionError):
        trace_distance(rho, np.eye(2, dtype=complex))


def test_mutual_information_of_bell_and_product_states(rng):
    assert mutual_information(bell(), PAIR, "1", "3") == pytest.approx(2 * np.log(2))
    product = kron_compose([random_density_matrix(2, rng), random_density_matrix(2, rng)])
    assert mutual_information(product, PAIR, "1", "3") == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(DimensionError):
        mutual_information(bell(), PAIR, "1", "1")


def test_negativity(rng):
    assert negativity(bell(), PAIR, "1") == pytest.approx(0.5)
    product = kron_compose([random_density_matrix(2, rng), random_density_matrix(2, rng)])
    assert negativity(product, PAIR, "1") == pytest.approx(0.0, abs=1e-10)
    assert negativity(np.eye(4, dtype=complex) / 4, PAIR, "3") == 0.0


def test_information_gain_sign():
    assert information_gain(mean_of_entropies=0.1, entropy_of_mean=0.4) == pytest.approx(0.3)


def test_coherent_spin_state_is_not_squeezed():
    report = spin_squeezing(projector(coherent_spin_state_x(10)), 10)
    assert report.xi2 == pytest.approx(1.0)
    assert report.mean_jx == pytest.approx(5.0)
    assert report.var_jz == pytest.approx(2.5)


def test_squeezing_rejects_wrong_sector():
    with pytest.raises(DimensionError):
        spin_squeezing(np.eye(3, dtype=complex) / 3, 10)
