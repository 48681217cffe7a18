import numpy as np
import pytest

from timemachine.model import MutationModel

PIM_HALF = [[0.5, 0.5], [0.5, 0.5]]
PIM_SKEW = [[0.1, 0.9], [0.1, 0.9]]
PDM = [[0.5, 0.5], [0.1, 0.9]]


@pytest.fixture
def pim_half():
    return MutationModel.from_matrix(PIM_HALF, 1.0)


@pytest.fixture
def pim_skew():
    return MutationModel.from_matrix(PIM_SKEW, 1.0)


@pytest.fixture
def pdm():
    return MutationModel.from_matrix(PDM, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
