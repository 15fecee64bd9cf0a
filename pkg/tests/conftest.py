import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import depthaug as da


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def default_params():
    return da.WaterParams(B=[0.15, 0.2, 0.25], beta=[0.08, 0.1, 0.12],
                          gamma=[0.1, 0.12, 0.15])
