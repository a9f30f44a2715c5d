import numpy as np
import pytest

from pschrod.pipeline import run_scheme
from pschrod.presets import (
    standard_grid,
    standard_potential,
    standard_scheme_config,
    two_bump_datum,
)


@pytest.fixture(scope="session")
def std_datum():
    return two_bump_datum(standard_grid())


@pytest.fixture(scope="session")
def std_config():
    return standard_scheme_config()


@pytest.fixture(scope="session")
def std_scheme_p2(std_datum, std_config):
    return run_scheme(std_datum, standard_potential(), 2.0, std_config)


@pytest.fixture(scope="session")
def std_scheme_p3(std_datum, std_config):
    return run_scheme(std_datum, standard_potential(), 3.0, std_config)


@pytest.fixture()
def rng():
    return np.random.default_rng(20250808)
