"""Acceptance criteria, one check per criterion.

Each ``criterion_*`` function returns ``(passed, detail)``; the pytest wrappers
record a ``CRITERION k: PASS|FAIL`` line (printed in the terminal summary) and
then assert. Run this file directly to print the lines without pytest.

Tolerances are the pinned acceptance values; see the README for the list.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from farseer.analysis import allocation_sweep, evaluate_held_out, monotonicity_check, optimal_allocation, robustness_curve
from farseer.core import REFERENCE_FARSEER, ChinchillaParams, LossGrid, LossPoint, eval_farseer, evaluate
from farseer.io import load_grid
from farseer.nonlinear import MultiStartConfig, fit_chinchilla_nonlinear, fit_farseer_nonlinear
from farseer.piecewise import PAIR_RTOL, FitWarning, build_diff_series, fit_farseer
from farseer.regression import select_joint
from farseer.synth import REFERENCE_D_LADDER, REFERENCE_N_LADDER, SurfaceSpec, generate_surface, ladder

NOISE = 1e-3
SEEDS = range(5)
EXTRAPOLATION_N = 2.51e10
D_LADDER = ladder(*REFERENCE_D_LADDER)
N_LADDER = ladder(*REFERENCE_N_LADDER)
DATASET_ENV = "FARSEER_DATASET"
DATASET_DEFAULT = Path(__file__).parent / "data" / "farseer_release.csv"


def _surface(seed=None):
    sigma = 0.0 if seed is None else NOISE
    return generate_surface(SurfaceSpec(REFERENCE_FARSEER, noise_sigma=sigma, seed=seed or 0))


def _extrapolation_target():
    return [LossPoint(EXTRAPOLATION_N, d, eval_farseer(REFERENCE_FARSEER, EXTRAPOLATION_N, d)) for d in D_LADDER]


def criterion_1():
    start = time.perf_counter()
    params, report = fit_farseer(_surface())
    seconds = time.perf_counter() - start
    exps = (params.alpha, params.beta, params.gamma)
    dev = max(abs(a - b) for a, b in zip(exps, (0.123, -0.1, 0.169)))
    ok = report.max_rel_err <= 1e-3 and dev <= 0.02 and seconds <= 60
    return ok, (f"max rel err {report.max_rel_err:.2e} (<= 1e-3); exponents "
                f"({exps[0]:.4f}, {exps[1]:.4f}, {exps[2]:.4f}), max deviation {dev:.1e} (<= 0.02); {seconds:.2f}s (<= 60s)")


def criterion_2():
    start = time.perf_counter()
    target = _extrapolation_target()
    clean, _ = fit_farseer(_surface())
    clean_err = evaluate_held_out(clean, target).max_rel_err
    noisy = []
    for seed in SEEDS:
        params, _ = fit_farseer(_surface(seed))
        noisy.append(evaluate_held_out(params, target).mean_rel_err)
    seconds = time.perf_counter() - start
    ok = clean_err <= 5e-3 and all(e <= 1.5e-2 for e in noisy) and seconds <= 300
    per_seed = ", ".join(f"{e:.2%}" for e in noisy)
    return ok, (f"noiseless max rel err {clean_err:.2e} (<= 0.5%); sigma=1e-3 mean rel err per seed "
                f"[{per_seed}] (each <= 1.5%); {seconds:.1f}s (<= 300s)")


def criterion_3():
    target = _extrapolation_target()
    rows = []
    for seed in SEEDS:
        grid = _surface(seed).filter(lambda p: p.n <= 6.4e9 * (1 + PAIR_RTOL))
        far, _ = fit_farseer(grid)
        chin = fit_chinchilla_nonlinear(grid, MultiStartConfig(starts=256, seed=0)).params
        rows.append((evaluate_held_out(far, target).mean_rel_err, evaluate_held_out(chin, target).mean_rel_err))
    ok = all(c > f for f, c in rows)
    detail = ", ".join(f"seed {s}: farseer {f:.2%} vs chinchilla {c:.2%}" for s, (f, c) in zip(SEEDS, rows))
    return ok, f"{sum(c > f for f, c in rows)}/5 seeds with chinchilla worse (need 5/5); {detail}"


def criterion_4():
    grid = _surface()
    _, report = fit_farseer(grid)
    res = fit_farseer_nonlinear(grid, MultiStartConfig(starts=256, seed=0))
    converged = int(np.sum(res.all_objectives < 1e-20))
    ok = res.objective >= report.rss
    return ok, (f"nonlinear objective {res.objective:.3e} vs piecewise {report.rss:.3e} "
                f"(ratio {res.objective / report.rss:.3g}, need >= 1); "
                f"{converged}/256 starts reached < 1e-20, {int(np.sum(~np.isfinite(res.all_objectives)))} diverged")


def _brute_n_star(law, c, points=10_000):
    ns = np.geomspace(1e6, 1e14, points)
    losses = []
    for n in ns:
        try:
            losses.append(evaluate(law, n, c / (6 * n)))
        except Exception:
            losses.append(math.inf)
    return ns[int(np.argmin(losses))]


def criterion_5():
    budgets = [10.0**k for k in range(20, 27)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FitWarning)
        sweep = allocation_sweep(REFERENCE_FARSEER, budgets)
    ratios = [pt.ratio for pt in sweep]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    interior = [not pt.at_boundary for pt in sweep]
    brute = [abs(pt.n_star / _brute_n_star(REFERENCE_FARSEER, pt.c) - 1) for pt in sweep]
    sym = ChinchillaParams(400.0, 0.3, 400.0, 0.3, 1.7)
    sym_dev = max(abs(optimal_allocation(sym, c).ratio - 1) for c in budgets)
    ok = increasing and all(interior) and max(brute) <= 1e-3 and sym_dev <= 1e-6
    n_stars = ", ".join(f"{pt.n_star:.3g}" for pt in sweep)
    return ok, (f"D/N strictly increasing: {increasing}; interior optima {sum(interior)}/7 "
                f"(n_star: {n_stars}); brute-force max dev {max(brute):.1e} (<= 1e-3); "
                f"symmetric chinchilla |ratio-1| {sym_dev:.1e} (<= 1e-6)")


def criterion_6():
    rep = monotonicity_check(REFERENCE_FARSEER, (1e8, 1e12), (1e9, 1e13), 50)
    return rep.ok, f"{len(rep.violations)} violations over {rep.checked} partial-derivative estimates (need 0)"


def criterion_7():
    # Exactly representable surfaces: the shift cancels bit-for-bit.
    ns, ds = [1.0, 2.0, 4.0, 8.0], 2.0 ** np.arange(12)
    shifts = [(lambda n: 0.0, 0.0), (lambda n: 0.25 * n * n, 3.0), (lambda n: 1.0 / n, -0.5),
              (lambda n: 2.0 ** -(n + 3), 1024.0)]

    def grid(fn):
        return LossGrid([LossPoint(n, d, fn(n, d)) for n in ns for d in ds], 2.0)

    base = build_diff_series(grid(lambda n, d: 64.0 / d + 8.0 / n + 16.0))
    exact = all(build_diff_series(grid(lambda n, d, f=f, c=c: 64.0 / d + 8.0 / n + 16.0 + f(n) + c)) == base
                for f, c in shifts)
    # Arbitrary real shifts of the published surface: report the deviation in ulps.
    ref = _surface()
    ref_series = build_diff_series(ref)
    worst = 0.0
    rng = np.random.default_rng(0)
    for _ in range(5):
        a, p, c = rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3), rng.uniform(0, 2)
        shifted = LossGrid([LossPoint(q.n, q.d, q.loss + a * (q.n / 1e9) ** p + c + 1.0) for q in ref], ref.lam)
        scale = max(q.loss for q in shifted)
        for s0, s1 in zip(ref_series, build_diff_series(shifted)):
            worst = max(worst, float(np.max(np.abs(s0.r - s1.r))) / np.spacing(scale))
    ok = exact and worst <= 4
    return ok, (f"bitwise identical on exactly representable shifts: {exact}; arbitrary real shifts "
                f"agree within {worst:.0f} ulp of the shifted loss (<= 4; bitwise equality needs exact addition)")


def criterion_8():
    wins = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        a = REFERENCE_FARSEER.exponent_of(N_LADDER) * np.exp(0.01 * rng.standard_normal(len(N_LADDER)))
        b = REFERENCE_FARSEER.coefficient_of(N_LADDER) * np.exp(0.01 * rng.standard_normal(len(N_LADDER)))
        table = select_joint(N_LADDER, a, b).table
        log_power = table[("log", "power", "log", "power")]
        identity_power = table[("identity", "power", "identity", "power")]
        wins += log_power < identity_power
    return wins >= 9, f"(log, power) beat (identity, power) on joint l_A + l_B in {wins}/10 seeds (need >= 9)"


def criterion_9():
    caps = N_LADDER[2:10]
    held = N_LADDER[-1]
    clean = [rep.mean_rel_err for _, rep in robustness_curve(_surface(), held, caps)]
    monotone = len(clean) == len(caps) and all(b <= a + 1e-9 for a, b in zip(clean, clean[1:]))
    improved = 0
    for seed in SEEDS:
        curve = robustness_curve(_surface(seed), held, caps)
        improved += curve[-1][1].mean_rel_err < curve[0][1].mean_rel_err
    ok = monotone and improved >= 4
    return ok, (f"noiseless curve non-increasing within 1e-9: {monotone} (max err {max(clean):.1e}); "
                f"noisy final-cap < first-cap in {improved}/5 seeds (need >= 4)")


def _dataset_path():
    env = os.environ.get(DATASET_ENV)
    path = Path(env) if env else DATASET_DEFAULT
    return path if path.exists() else None


def criterion_10():
    path = _dataset_path()
    grid = load_grid(path)
    top = max(grid.model_sizes)
    params, _ = fit_farseer(grid.filter(lambda p: p.n < top * (1 - PAIR_RTOL)))
    err = evaluate_held_out(params, [p for p in grid if p.n >= top * (1 - PAIR_RTOL)]).mean_rel_err
    return err <= 1e-3, f"held-out mean rel err at n={top:.3g}: {err:.3e} (<= 1e-3)"


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 11)}


def _check(k, acceptance_line):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FitWarning)
        ok, detail = CRITERIA[k]()
    acceptance_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


@pytest.mark.parametrize("k", range(1, 10))
def test_criterion(k, acceptance_line):
    _check(k, acceptance_line)


def test_criterion_10_real_data(acceptance_line):
    if _dataset_path() is None:
        acceptance_line(f"CRITERION 10: SKIP - no released dataset (set {DATASET_ENV} or add {DATASET_DEFAULT.name})")
        pytest.skip("released dataset not supplied")
    _check(10, acceptance_line)


if __name__ == "__main__":
    warnings.simplefilter("ignore", FitWarning)
    for k, fn in CRITERIA.items():
        if k == 10 and _dataset_path() is None:
            print("CRITERION 10: SKIP - no released dataset")
            continue
        ok, detail = fn()
        print(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} - {detail}", flush=True)
