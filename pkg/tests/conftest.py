import os

import hypothesis
import numpy as np
import pytest

from market import Market, ToleranceConfig

np.seterr(all="warn")

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=200, deadline=None, derandomize=True)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def tol():
    return ToleranceConfig()


@pytest.fixture
def footnote_market():
    # One good, two agents with equal budgets: no integral equilibrium
    return Market([[1.0], [1.0]], [1.0, 1.0])


@pytest.fixture
def symmetric_market():
    return Market([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]], [1.0, 1.0])
