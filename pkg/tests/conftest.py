import numpy as np
import pytest

from photonic_pim.devices import OpcmCellModel
from photonic_pim.memory import MemoryGeometry


@pytest.fixture
def geometry():
    return MemoryGeometry()


@pytest.fixture
def ideal_cell():
    return OpcmCellModel(mode="ideal")


@pytest.fixture
def physical_cell():
    return OpcmCellModel(mode="physical")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
