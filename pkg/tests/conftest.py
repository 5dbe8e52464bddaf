import pytest

from rydarp.config import load_config


@pytest.fixture(scope="session")
def fig2():
    return load_config("fig2")


@pytest.fixture(scope="session")
def fig3():
    return load_config("fig3")


@pytest.fixture(scope="session")
def fig5():
    return load_config("fig5")
