import pytest
from mpmath import mp

from circlelab.canonical import (
    golden_rotation,
    golden_table,
    oracle_map,
    partner_map,
    witness_map,
)


@pytest.fixture(autouse=True)
def working_precision():
    saved = mp.prec
    mp.prec = 256
    yield
    mp.prec = saved


@pytest.fixture(scope="session")
def gtable():
    mp.prec = 256
    return golden_table(22)


@pytest.fixture(scope="session")
def rot():
    mp.prec = 256
    return golden_rotation()


@pytest.fixture(scope="session")
def oracle():
    mp.prec = 256
    return oracle_map()


@pytest.fixture(scope="session")
def witness():
    mp.prec = 256
    return witness_map()


@pytest.fixture(scope="session")
def partner():
    mp.prec = 256
    return partner_map()
