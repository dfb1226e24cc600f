import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from polyrep.conservative import make_conservative  # noqa: E402

settings.register_profile(
    "ci", max_examples=100, derandomize=True, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def ex1():
    G, dec = make_conservative(oracles.EX1_A0, oracles.EX1_SIG, oracles.EX1_P)
    return G, dec


@pytest.fixture(scope="session")
def ex2():
    G, dec = make_conservative(oracles.EX2_A0, oracles.EX2_SIG, oracles.EX2_P)
    return G, dec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config.acceptance_lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
