import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bergerdeck import build_grid, build_weights


@pytest.fixture(scope="session")
def tiny_grid():
    return build_grid(5, 3, 1.0)


@pytest.fixture(scope="session")
def tiny_weights(tiny_grid):
    return build_weights(tiny_grid)


@pytest.fixture(scope="session")
def preset_grid():
    return build_grid(149, 99, __import__("math").pi / 4)
