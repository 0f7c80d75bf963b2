import numpy as np
import pytest

from movant.config import ScenarioConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def default_config():
    return ScenarioConfig()


def random_hpd(rng, n, shift=1.0):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return G @ G.conj().T + shift * np.eye(n)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section(f"acceptance criteria ({test_acceptance.LEVEL})")
        for line in test_acceptance.LINES:
            terminalreporter.write_line(line)
