import math
import warnings

import numpy as np
import pytest

from farseer.core import REFERENCE_FARSEER, ChinchillaParams
from farseer.piecewise import FitWarning, fit_farseer
from farseer.synth import SurfaceSpec, generate_surface


@pytest.fixture(scope="session")
def reference_grid():
    """Noiseless surface of the published coefficients on the baseline ladder (11 x 18)."""
    return generate_surface(SurfaceSpec(REFERENCE_FARSEER))


@pytest.fixture(scope="session")
def reference_fit(reference_grid):
    return fit_farseer(reference_grid)


@pytest.fixture
def chinchilla_params():
    return ChinchillaParams(A=406.4, alpha=0.34, B=410.7, beta=0.28, E=1.69)


@pytest.fixture
def small_ladder():
    """A 5 x 8 ladder: cheap enough for repeated fits."""
    return dict(n_ladder=(1e8, 4e8 * (1 + 1e-9), math.sqrt(2.0)), d_ladder=(1e9, 1.6e10, math.sqrt(2.0)))


@pytest.fixture(autouse=True)
def _quiet_fit_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FitWarning)
        yield


def rel(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)) / np.abs(np.asarray(b))


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    """Record one pass/fail line per acceptance criterion; printed after the run."""
    def record(line: str) -> None:
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
