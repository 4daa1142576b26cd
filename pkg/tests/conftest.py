import warnings

import numpy as np
import pytest
from hypothesis import strategies as st

from dsrn.background import Background, BlackHoleParams
from dsrn.errors import ConditionsViolated

DESK = BlackHoleParams(1.0, 0.5, 0.01)
MODERATE = BlackHoleParams(1.0, 0.5, 0.05)
NEAR_EXTREMAL = BlackHoleParams(1.0, 0.1, 0.1)


@pytest.fixture(scope="session")
def desk_bg():
    return Background.from_params(DESK)


@pytest.fixture(scope="session")
def moderate_bg():
    return Background.from_params(MODERATE)


@pytest.fixture(scope="session")
def extremal_bg():
    return Background.from_params(NEAR_EXTREMAL)


@pytest.fixture(autouse=True)
def _quiet_conditions():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditionsViolated)
        yield


# M = 1 throughout; admissibility is filtered in the tests with assume().
params_strategy = st.builds(
    lambda q, lam: BlackHoleParams(1.0, q, lam),
    st.floats(0.05, 0.99),
    st.floats(1e-4, 0.1),
)


def random_admissible(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        p = BlackHoleParams(1.0, rng.uniform(0.05, 0.99), 10 ** rng.uniform(-4, -1))
        if p.admissible:
            out.append(Background.from_params(p))
    return out
