import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hydride_sim import Field, Grid, HSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def grid16():
    return Grid(1, (16,), (1.0,))


@pytest.fixture
def grid8():
    return Grid(1, (8,), (1.0,))


@pytest.fixture
def grid2d():
    return Grid(2, (6, 5), (1.0, 2.0))


@pytest.fixture
def spec():
    return HSpec()


def bump_field(grid, base, amp, center=0.5, width=0.12):
    x = grid.coords[:, 0]
    return Field(grid, base + amp * np.exp(-0.5 * ((x - center) / width) ** 2))
