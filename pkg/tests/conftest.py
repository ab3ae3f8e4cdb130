import numpy as np
import pytest

from dcecavity.statespace import StateVector, parity_mask


def random_state(rng, levels, fock_cutoff, parity_sector=False):
    table = rng.normal(size=(levels, fock_cutoff + 1)) + 1j * rng.normal(size=(levels, fock_cutoff + 1))
    if parity_sector:
        table[parity_mask(levels, fock_cutoff)] = 0.0
    table /= np.linalg.norm(table)
    return StateVector(table)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
