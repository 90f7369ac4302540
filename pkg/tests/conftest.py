import pytest

from ripvisc import SpatialGrid, TimeGrid


@pytest.fixture
def grid():
    return SpatialGrid(29)


@pytest.fixture
def tg():
    return TimeGrid(40)
