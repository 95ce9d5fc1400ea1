import numpy as np
import pytest

from subsetpriv import uniform_design

# Census-income population distribution of race used across the audit tests
RACE_LABELS = ["Amer-Indian-Eskimo", "Asian-Pac-Islander", "Black", "Other", "White"]
RACE_W = np.array([0.009551, 0.031909, 0.095943, 0.008323, 0.854274])

# gender x income counts from the same dataset: rows (female, male),
# columns (low, high), row-major combined order
GENDER_INCOME_COUNTS = np.array([[9592, 1179], [15128, 6662]], dtype=float)


@pytest.fixture(scope="session")
def uniform4():
    return uniform_design(4)


@pytest.fixture(scope="session")
def uniform5():
    return uniform_design(5)


@pytest.fixture(scope="session")
def race_w():
    return RACE_W.copy()


@pytest.fixture
def rng():
    return np.random.default_rng(20240731)
