import pytest

from virialpos.graphgen import complete, cycle, from_edges


@pytest.fixture
def k22():
    return complete(2)


@pytest.fixture
def k33():
    return complete(3)


@pytest.fixture
def c6():
    return cycle(3)


@pytest.fixture
def c8():
    return cycle(4)


@pytest.fixture
def two_c4():
    return from_edges(4, 2, [(0, 0), (0, 1), (1, 0), (1, 1),
                             (2, 2), (2, 3), (3, 2), (3, 3)])
