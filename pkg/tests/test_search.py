import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from farseer.search import coarse_exponent_grid, fine_exponent_grid, golden_section, grid_minimize


def test_coarse_grid_shape():
    g = coarse_exponent_grid()
    assert len(g) == 200  # 201 multiples of 0.01 in [-1, 1] minus zero
    assert g.min() == -1.0 and g.max() == 1.0
    assert not np.any(np.abs(g) < 0.005)


def test_fine_grid_excludes_zero():
    g = fine_exponent_grid(0.0)
    assert len(g) == 20 and not np.any(g == 0)


@given(st.floats(-0.98, 0.98).filter(lambda e: abs(e) > 0.02))
@settings(max_examples=60, deadline=None)
def test_grid_minimize_recovers_quadratic_minimum(target):
    e, v = grid_minimize(lambda x: (x - target) ** 2)
    assert abs(e - target) <= 0.0005 + 1e-12


def test_grid_minimize_skips_infeasible():
    e, v = grid_minimize(lambda x: math.inf if x < 0.5 else (x - 0.7) ** 2 if x != 0.7 else math.nan)
    assert e == pytest.approx(0.699, abs=1e-12) or e == pytest.approx(0.701, abs=1e-12)


def test_grid_minimize_nothing_feasible():
    e, v = grid_minimize(lambda x: math.inf)
    assert math.isnan(e) and v == math.inf


@given(st.floats(-5, 5))
@settings(max_examples=60, deadline=None)
def test_golden_section_matches_brute_force(center):
    f = lambda x: math.cosh(x - center)  # noqa: E731
    x, fx = golden_section(f, -10.0, 10.0, 1e-8)
    grid = np.linspace(-10, 10, 200001)
    brute = grid[np.argmin(np.cosh(grid - center))]
    assert abs(x - brute) <= 1e-4
    assert fx == f(x)
