import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ph_eq import sis
from ph_eq.acceptance import REF_B, REF_D

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def ref_net():
    return sis.SISNetwork(REF_D, REF_B)


@pytest.fixture
def ref_ctrl():
    return sis.ControlSpec([sis.PowerControl(0.5, 0.5), sis.LinearControl(0.9)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(LINES):
            terminalreporter.write_line(line)
