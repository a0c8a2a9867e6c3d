import numpy as np
import pytest

from msched.harness.config import load_profile_for
from msched.lattice import build_lattice
from msched.noise import synthesize_profile

# (criterion number, line) pairs filled in by test_acceptance.py
ACCEPTANCE_LINES: list[tuple[int, str]] = []


@pytest.fixture(scope="session")
def lattices():
    return {d: build_lattice(d) for d in (3, 5, 7, 9)}


@pytest.fixture(scope="session")
def toy_profile(lattices):
    return load_profile_for("toy-d3", lattices[3])


@pytest.fixture(scope="session")
def ibm_d3(lattices):
    return load_profile_for("ibm-ithaca", lattices[3])


def random_profile(lat, seed, ger=None):
    """Heterogeneous synthetic profile with a seed-dependent spread."""
    rng = np.random.default_rng(seed)
    mean = float(rng.uniform(0.005, 0.05))
    std = float(rng.uniform(0.0, 0.03))
    g = float(rng.uniform(0.0005, 0.01)) if ger is None else ger
    return synthesize_profile(lat, mean, std, g, seed)


@pytest.fixture
def make_profile():
    return random_profile


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
