import numpy as np
import pytest

from covbracket.brackets import BracketConfig
from covbracket.mass_shell import build_lattice


@pytest.fixture
def lat26():
    return build_lattice(1.0, 1)


@pytest.fixture
def cfg26(lat26):
    return BracketConfig(lat26)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
