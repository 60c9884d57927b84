"""Monotonicity, differential perspectives and a surface comparison against Chinchilla.

Run: python3 demos/diagnostics.py
"""

import warnings

from farseer import (REFERENCE_FARSEER, FitWarning, differential_perspectives, fit_law, monotonicity_check,
                     surface_compare)
from farseer.synth import SurfaceSpec, generate_surface

warnings.simplefilter("ignore", FitWarning)

mono = monotonicity_check(REFERENCE_FARSEER)
print(f"monotonicity: {len(mono.violations)} violations in {mono.checked} derivative estimates")

grid = generate_surface(SurfaceSpec(REFERENCE_FARSEER, noise_sigma=1e-3, seed=1))
for key, summary in differential_perspectives(grid).items():
    print(f"{key}: mean r2 {summary.mean_r2:.3f} over {summary.series} series, "
          f"slopes {min(summary.slopes):+.3f} .. {max(summary.slopes):+.3f}")

chin, _ = fit_law(grid, "chinchilla", "nonlinear")
delta = surface_compare(REFERENCE_FARSEER, chin, (1e8, 1e11), (1e9, 1e13), 9)
print(f"\nrelative difference published law vs fitted Chinchilla: {len(delta.zero_crossings)} sign changes")
for n, d, value in list(delta.rows())[::10]:
    print(f"  n={n:.2e} d={d:.2e} delta={value:+.4f}")
