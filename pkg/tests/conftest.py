import sys

import numpy as np
import pytest

from spectralign import shapes


@pytest.fixture(scope="session")
def sphere4():
    return shapes.icosphere(4)


@pytest.fixture(scope="session")
def sphere2():
    return shapes.icosphere(2)


@pytest.fixture(scope="session")
def small_mesh():
    """A ~200-vertex closed, irregular mesh for finite-difference checks."""
    return shapes.bumpy_sphere(2, amplitude=0.15, seed=3)


@pytest.fixture(scope="session")
def figure():
    return shapes.articulated_figure()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
