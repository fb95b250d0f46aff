import sys

import numpy as np
import pytest

from orbitgeom.core import BundlePoint, Spectrum, project_to_fiber_tangent
from orbitgeom.sampling import haar_unitary, random_spectrum_values


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_point(rng, n, k, degenerate=False):
    """A bundle point with a random (possibly degenerate) spectrum of rank k."""
    spectrum = Spectrum.from_values(random_spectrum_values(k, rng, degenerate))
    u = haar_unitary(n, rng)[:, :k]
    return BundlePoint(u * np.sqrt(spectrum.values)[None, :], spectrum)


def random_tangent(rng, psi):
    m = rng.normal(size=psi.shape) + 1j * rng.normal(size=psi.shape)
    return project_to_fiber_tangent(psi, m)


def random_shape(rng, max_n=6):
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.integers(1, n + 1))
    return n, k


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
