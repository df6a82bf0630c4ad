import numpy as np
import pytest

from steerbound.geometry import geodesic_union, platonic_set
from steerbound.strategies import enumerate_supports, grouped_supports


@pytest.fixture(scope="session")
def square2():
    return platonic_set(2)


@pytest.fixture(scope="session")
def oct3():
    return platonic_set(3)


@pytest.fixture(scope="session")
def cube4():
    return platonic_set(4)


@pytest.fixture(scope="session")
def ico6():
    return platonic_set(6)


@pytest.fixture(scope="session")
def dod10():
    return platonic_set(10)


@pytest.fixture(scope="session")
def geo7():
    return geodesic_union(platonic_set(3), platonic_set(4))


@pytest.fixture(scope="session")
def geo16():
    return geodesic_union(platonic_set(6), platonic_set(10))


# strategy tables are pure functions of the set; share them across tests
@pytest.fixture(scope="session")
def oct_table(oct3):
    return enumerate_supports(oct3)


@pytest.fixture(scope="session")
def cube_table(cube4):
    return enumerate_supports(cube4)


@pytest.fixture(scope="session")
def geo7_table(geo7):
    return enumerate_supports(geo7)


@pytest.fixture(scope="session")
def geo7_gtable(geo7):
    return grouped_supports(geo7)


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.Philox(20260819))
