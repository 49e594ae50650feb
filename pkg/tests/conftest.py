import pytest

from spotlab import beamsim, photonics, ybdata


@pytest.fixture(scope="session")
def catalog():
    return ybdata.load_catalog()


@pytest.fixture(scope="session")
def oven90(catalog):
    return beamsim.default_oven(catalog)


@pytest.fixture(scope="session")
def beams():
    return photonics.four_beam_array()
