import numpy as np
import pytest

from pfest import CoverageProfile, make_bernoulli_pair, make_finite_pair, make_twopoint_mu_pair


@pytest.fixture(scope="session")
def bern():
    """Two-atom pair with ratios 0.75 and 1.25; most closed-form anchors
    in the suite are computed against it."""
    return make_bernoulli_pair(0.5, 0.25)


@pytest.fixture(scope="session")
def bern_profile(bern):
    return CoverageProfile.from_pair(bern)


@pytest.fixture(scope="session")
def twopoint():
    # ratio 0 on the heavy atom, 4 on the light one
    return make_twopoint_mu_pair(0.25)


@pytest.fixture(scope="session")
def identity_pair():
    return make_finite_pair([0.5, 0.5], [0.5, 0.5], 1.0, name="identity")


@pytest.fixture(scope="session")
def identity_profile(identity_pair):
    return CoverageProfile.from_pair(identity_pair)
