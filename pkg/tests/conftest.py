import os

import pytest
from hypothesis import settings

from sfde.covariance import compute_constants
from sfde.params import ModelParams

settings.register_profile("default", deadline=None, max_examples=60)
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def she():
    return ModelParams.she()


@pytest.fixture(scope="session")
def she_consts(she):
    return compute_constants(she)


@pytest.fixture(scope="session")
def fractional():
    """A parameter set with fractional time derivative and coloured-in-time noise."""
    return ModelParams(alpha=2.0, beta=0.8, gamma_rl=0.1, h0=0.6, h_spatial=(0.5,))


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
