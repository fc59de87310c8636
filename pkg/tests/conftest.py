import numpy as np
import pytest

from dampol.coupling import builtin_model, coupling_from_lagrangian, random_coupling, structure_tensor
from dampol.lattice import FrequencyGrid, build_lattice


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def small_lattice():
    return build_lattice(2, 1.0)


@pytest.fixture(scope="session")
def single_site():
    return build_lattice(1, 1.0)


@pytest.fixture(scope="session")
def grid12():
    return FrequencyGrid.midpoint(12, 8.0)


@pytest.fixture(scope="session")
def lorentz_coupling(small_lattice, grid12):
    return coupling_from_lagrangian(builtin_model("local_lorentz", small_lattice, grid12))


@pytest.fixture(scope="session")
def lorentz_structure(lorentz_coupling):
    return structure_tensor(lorentz_coupling)


@pytest.fixture
def random_lagrangian(small_lattice, grid12, rng):
    return coupling_from_lagrangian(random_coupling(small_lattice, grid12, rng))
