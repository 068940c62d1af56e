import sys

import numpy as np
import pytest

from mcnoma.channel import SystemParams, UserProfile
from mcnoma.power import VirtualUser


def random_virtual_user(rng, rate_range=(0.1, 10.0), beta_range=(1e-2, 1e3),
                        outage_range=None, user_id=0):
    beta = float(10 ** rng.uniform(np.log10(beta_range[0]), np.log10(beta_range[1])))
    rate = float(rng.uniform(*rate_range))
    kw = {}
    if outage_range is not None:
        kw["outage_req"] = float(rng.uniform(*outage_range))
    return VirtualUser(user_id, 0, rate, beta, **kw)


def random_profiles(rng, k, params, cell=200.0, outage=(1e-3, 0.1)):
    return [
        UserProfile.create(i + 1, float(rng.uniform(30, cell)), float(rng.uniform(0.1, 10)),
                           float(rng.uniform(*outage)), params)
        for i in range(k)
    ]


@pytest.fixture
def default_params():
    return SystemParams.from_dbm(-128.0, 3.6)


@pytest.fixture
def example_pair():
    a = VirtualUser.from_sinr(1.0, 1.0, user_id=1)
    b = VirtualUser.from_sinr(0.5, 3.0, user_id=2)
    return a, b


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
