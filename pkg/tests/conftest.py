import numpy as np
import pytest

from vinesim.model import MaterialModel, RobotDescription


@pytest.fixture
def desc():
    return RobotDescription()


@pytest.fixture
def material():
    return MaterialModel()


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)
