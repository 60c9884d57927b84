"""One-dimensional searches: coarse-to-fine exponent grids and golden-section."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

COARSE_STEP = 0.01
FINE_STEP = 0.001
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def coarse_exponent_grid(lo: float = -1.0, hi: float = 1.0, step: float = COARSE_STEP,
                         min_abs: float = 0.005) -> np.ndarray:
    """Evenly spaced exponents in [lo, hi], skipping |e| < min_abs."""
    k = np.arange(math.ceil(lo / step - 1e-9), math.floor(hi / step + 1e-9) + 1)
    grid = np.round(k * step, 12)
    return grid[np.abs(grid) >= min_abs]


def fine_exponent_grid(center: float, coarse_step: float = COARSE_STEP,
                       fine_step: float = FINE_STEP) -> np.ndarray:
    """Exponents within one coarse step of ``center`` at the fine spacing."""
    half = int(round(coarse_step / fine_step))
    grid = np.round(center + np.arange(-half, half + 1) * fine_step, 12)
    return grid[np.abs(grid) >= fine_step / 2]


def grid_minimize(objective: Callable[[float], float], coarse=None,
                  fine_step: float = FINE_STEP):
    """Minimize ``objective`` over a coarse grid, then a fine grid around the winner.

    Infeasible candidates may return ``inf`` or ``nan``; both are skipped.
    Returns ``(best_exponent, best_value)``; ``(nan, inf)`` when nothing is feasible.
    """
    coarse = coarse_exponent_grid() if coarse is None else np.asarray(coarse, dtype=float)
    best_e, best_v = _scan(objective, coarse, math.nan, math.inf)
    if not math.isfinite(best_v) or len(coarse) < 2:
        return best_e, best_v
    spacing = float(np.min(np.diff(np.sort(coarse))))
    if fine_step < spacing:
        best_e, best_v = _scan(objective, fine_exponent_grid(best_e, spacing, fine_step), best_e, best_v)
    return best_e, best_v


def _scan(objective, grid, best_e, best_v):
    for e in grid:
        v = objective(float(e))
        if v is not None and math.isfinite(v) and v < best_v:
            best_e, best_v = float(e), float(v)
    return best_e, best_v


def golden_section(f: Callable[[float], float], lo: float, hi: float, width: float):
    """Golden-section search for a minimum of a unimodal ``f`` on [lo, hi].

    Stops once the bracket is narrower than ``width``. Returns ``(x, f(x))``.
    """
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > width:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)
