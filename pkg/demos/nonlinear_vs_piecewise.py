"""Joint multi-start nonlinear fitting versus the staged piecewise pipeline.

Run: python3 demos/nonlinear_vs_piecewise.py
"""

import time
import warnings

import numpy as np

from farseer import REFERENCE_FARSEER, FitWarning, MultiStartConfig, fit_farseer, fit_farseer_nonlinear
from farseer.synth import SurfaceSpec, generate_surface

warnings.simplefilter("ignore", FitWarning)
grid = generate_surface(SurfaceSpec(REFERENCE_FARSEER))

t0 = time.perf_counter()
_, report = fit_farseer(grid)
t1 = time.perf_counter()
res = fit_farseer_nonlinear(grid, MultiStartConfig(starts=64, seed=0))
t2 = time.perf_counter()

objs = res.all_objectives
print(f"piecewise : rss {report.rss:.3e} in {t1 - t0:.2f}s")
print(f"nonlinear : best rss {res.objective:.3e} in {t2 - t1:.2f}s over {len(objs)} starts")
print(f"            {int(np.sum(~np.isfinite(objs)))} diverged, median finite rss {np.median(objs[np.isfinite(objs)]):.3e}")
print("Both best objectives sit at the float64 floor on noiseless data; the staged")
print("fit gets there deterministically, the joint fit only from lucky starts.")
