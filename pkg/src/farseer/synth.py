"""Seeded synthetic loss surfaces on geometric (n, d) ladders."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ChinchillaParams, FarseerParams, LossGrid, LossPoint, evaluate
from .errors import EvaluationError, GridError

LADDER_RTOL = 0.01

# Ladder ranges of the published baseline sweep.
REFERENCE_N_LADDER = (2.01e8, 6.37e9, math.sqrt(2.0))
REFERENCE_D_LADDER = (1.0e9, 4.31e11, math.sqrt(2.0))


def ladder(lo: float, hi: float, ratio: float) -> np.ndarray:
    """Geometric sequence lo * ratio**k, keeping terms up to hi (1% slack)."""
    if not (lo > 0 and hi >= lo and ratio > 1):
        raise ValueError(f"invalid ladder ({lo}, {hi}, {ratio})")
    count = int(math.floor(math.log(hi * (1 + LADDER_RTOL) / lo) / math.log(ratio))) + 1
    return lo * ratio ** np.arange(count)


@dataclass(frozen=True)
class SurfaceSpec:
    """Recipe for a synthetic grid.

    ``noise_decay`` > 0 switches to a per-size noise schedule
    sigma(n) = noise_sigma * (n / n_min) ** -noise_decay.
    """

    params: FarseerParams | ChinchillaParams
    n_ladder: tuple[float, float, float] = REFERENCE_N_LADDER
    d_ladder: tuple[float, float, float] = REFERENCE_D_LADDER
    noise_sigma: float = 0.0
    seed: int = 0
    noise_decay: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise ValueError("noise_sigma must be finite and non-negative")
        for lo, hi, ratio in (self.n_ladder, self.d_ladder):
            if not (lo > 0 and hi >= lo and ratio > 1):
                raise ValueError("ladders must be increasing with ratio > 1")

    @property
    def family(self) -> str:
        return "farseer" if isinstance(self.params, FarseerParams) else "chinchilla"


def point_noise(seed: int, i: int, j: int) -> float:
    """Standard normal draw keyed by (seed, n-index, d-index)."""
    return float(np.random.default_rng([seed, i, j]).standard_normal())


def generate_surface(spec: SurfaceSpec) -> LossGrid:
    ns = ladder(*spec.n_ladder)
    ds = ladder(*spec.d_ladder)
    points = []
    for i, n in enumerate(ns):
        sigma = spec.noise_sigma * (n / ns[0]) ** (-spec.noise_decay)
        for j, d in enumerate(ds):
            try:
                loss = evaluate(spec.params, float(n), float(d))
            except EvaluationError as exc:
                raise EvaluationError(f"at (n={n:.6g}, d={d:.6g}): {exc}") from exc
            if sigma > 0:
                loss = loss + sigma * point_noise(spec.seed, i, j)
            if not loss > 0:
                raise GridError(f"noisy loss {loss:.6g} <= 0 at (n={n:.6g}, d={d:.6g})")
            points.append(LossPoint(float(n), float(d), float(loss)))
    return LossGrid(points, lam=spec.n_ladder[2] if spec.d_ladder[2] == spec.n_ladder[2] else spec.d_ladder[2])
