"""Fit the law to a synthetic grid and extrapolate four times past the largest model.

Run: python3 demos/fit_and_extrapolate.py
"""

import warnings

from farseer import REFERENCE_FARSEER, FitWarning, LossPoint, eval_farseer, evaluate_held_out, fit_farseer
from farseer.synth import REFERENCE_D_LADDER, SurfaceSpec, generate_surface, ladder

warnings.simplefilter("ignore", FitWarning)
target_n = 2.51e10
target = [LossPoint(target_n, d, eval_farseer(REFERENCE_FARSEER, target_n, d)) for d in ladder(*REFERENCE_D_LADDER)]

print("sigma    seed  fit max rel err   extrapolation mean rel err")
for sigma, seed in [(0.0, 0), (1e-3, 0), (1e-3, 1), (1e-3, 2)]:
    grid = generate_surface(SurfaceSpec(REFERENCE_FARSEER, noise_sigma=sigma, seed=seed))
    params, report = fit_farseer(grid)
    err = evaluate_held_out(params, target).mean_rel_err
    print(f"{sigma:<8g} {seed:<5d} {report.max_rel_err:<17.2e} {err:.3%}")

params, _ = fit_farseer(generate_surface(SurfaceSpec(REFERENCE_FARSEER)))
print("\nrecovered from the noiseless grid:")
for name, value in params.as_dict().items():
    print(f"  {name:>5} = {value: .6f}   (generator {getattr(REFERENCE_FARSEER, name): .6f})")
