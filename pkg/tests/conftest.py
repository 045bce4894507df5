import pytest

from monopole_orbits import ModelParams


@pytest.fixture
def p0():
    return ModelParams(2.0, 1.0, 0.0)


@pytest.fixture
def p2():
    return ModelParams(2.0, 1.0, 2.0)
