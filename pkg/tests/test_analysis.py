import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from farseer.analysis import (
    allocation_sweep,
    budgets_per_decade,
    differential_perspectives,
    evaluate_held_out,
    fit_law,
    monotonicity_check,
    optimal_allocation,
    robustness_curve,
    surface_compare,
)
from farseer.core import REFERENCE_FARSEER, ChinchillaParams, FarseerParams, LossGrid, LossPoint, evaluate
from farseer.nonlinear import MultiStartConfig
from farseer.piecewise import FitWarning, fit_farseer
from farseer.synth import SurfaceSpec, generate_surface, ladder

SYMMETRIC = ChinchillaParams(A=400.0, alpha=0.3, B=400.0, beta=0.3, E=1.7)
ASYMMETRIC = ChinchillaParams(A=406.4, alpha=0.34, B=410.7, beta=0.28, E=1.69)


def brute_force_n_star(law, c, points=10_000):
    ns = np.geomspace(1e6, 1e14, points)
    losses = []
    for n in ns:
        try:
            losses.append(evaluate(law, n, c / (6 * n)))
        except Exception:
            losses.append(math.inf)
    return ns[int(np.argmin(losses))], ns, np.array(losses)


class TestOptimalAllocation:
    @pytest.mark.parametrize("c", [1e18, 1e21, 1e24])
    def test_symmetric_law_splits_evenly(self, c):
        pt = optimal_allocation(SYMMETRIC, c)
        assert pt.n_star == pytest.approx(math.sqrt(c / 6), rel=1e-6)
        assert abs(pt.ratio - 1) <= 1e-6
        assert not pt.at_boundary

    @pytest.mark.parametrize("law", [ASYMMETRIC, REFERENCE_FARSEER], ids=["chinchilla", "farseer"])
    @pytest.mark.parametrize("c", [1e20, 1e23, 1e26])
    def test_matches_brute_force_scan(self, law, c):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FitWarning)
            pt = optimal_allocation(law, c)
        n_brute, ns, losses = brute_force_n_star(law, c)
        assert pt.n_star == pytest.approx(n_brute, rel=1e-3)
        assert pt.loss_at_opt <= losses.min() + 1e-12
        assert pt.c == pytest.approx(6 * pt.n_star * pt.d_star, rel=1e-12)

    def test_boundary_flagged_and_warned(self):
        # The published surface keeps falling along C = 6ND towards the largest model sizes.
        with pytest.warns(FitWarning, match="boundary"):
            pt = optimal_allocation(REFERENCE_FARSEER, 1e24)
        assert pt.at_boundary and pt.n_star == pytest.approx(1e14, rel=1e-12)

    def test_flop_factor_configurable(self):
        pt = optimal_allocation(SYMMETRIC, 1e22, flop_factor=8.0)
        assert pt.n_star == pytest.approx(math.sqrt(1e22 / 8), rel=1e-6)

    def test_invalid_budget(self):
        with pytest.raises(ValueError):
            optimal_allocation(SYMMETRIC, -1.0)

    def test_sweep_equals_single_calls(self):
        budgets = budgets_per_decade(1e20, 1e24)
        sweep = allocation_sweep(ASYMMETRIC, budgets)
        assert sweep == [optimal_allocation(ASYMMETRIC, c) for c in budgets]
        assert [pt.ratio for pt in allocation_sweep(SYMMETRIC, budgets)] == pytest.approx([1.0] * 5, abs=1e-6)

    def test_sweep_rejects_unsorted(self):
        with pytest.raises(ValueError):
            allocation_sweep(SYMMETRIC, [1e22, 1e20])

    def test_budgets_per_decade(self):
        assert budgets_per_decade(1e20, 1e22, 2) == pytest.approx([1e20, 10**20.5, 1e21, 10**21.5, 1e22])


class TestEvaluateHeldOut:
    def test_self_consistent(self):
        pts = [LossPoint(n, d, evaluate(REFERENCE_FARSEER, n, d)) for n in (1e9, 1e10) for d in (1e10, 1e11)]
        rep = evaluate_held_out(REFERENCE_FARSEER, pts)
        assert max(r[4] for r in rep.held_out) <= 1e-12

    def test_uniform_offset(self):
        law = ChinchillaParams(0.0, 0.5, 0.0, 0.5, 1.01)
        rep = evaluate_held_out(law, [LossPoint(1e9, d, 1.0) for d in (1e9, 1e10, 1e11)])
        assert rep.mean_rel_err == pytest.approx(0.01, abs=1e-15)

    @given(st.lists(st.floats(0.5, 3.0), min_size=1, max_size=5))
    @settings(max_examples=50, deadline=None)
    def test_aggregates_match_hand_means(self, losses):
        law = ChinchillaParams(0.0, 0.5, 0.0, 0.5, 1.0)
        pts = [LossPoint(1e9, 1e9 * (k + 1), v) for k, v in enumerate(losses)]
        rep = evaluate_held_out(law, pts)
        errs = [abs(1.0 - v) / v for v in losses]
        assert rep.mean_rel_err == pytest.approx(sum(errs) / len(errs), rel=1e-12, abs=1e-15)
        assert rep.max_rel_err == max(errs)

    def test_empty(self):
        with pytest.raises(ValueError):
            evaluate_held_out(SYMMETRIC, [])

    def test_farseer_extrapolates_better_than_chinchilla(self, reference_grid):
        truncated = reference_grid.filter(lambda p: p.n <= 1.61e9)
        far, _ = fit_farseer(truncated)
        chin, _ = fit_law(truncated, "chinchilla", "nonlinear", MultiStartConfig(starts=64))
        target = [LossPoint(6.432e9, d, evaluate(REFERENCE_FARSEER, 6.432e9, d))
                  for d in ladder(1e9, 4.31e11, math.sqrt(2))]
        assert evaluate_held_out(far, target).mean_rel_err < evaluate_held_out(chin, target).mean_rel_err


class TestRobustnessCurve:
    def test_noiseless_error_non_increasing(self, reference_grid):
        caps = ladder(2.01e8, 6.37e9, math.sqrt(2))[2:10]
        curve = robustness_curve(reference_grid, 6.432e9, caps)
        errs = [rep.mean_rel_err for _, rep in curve]
        assert len(curve) == len(caps)
        assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))

    def test_single_full_cap_is_fit_then_evaluate(self, reference_grid):
        top = max(reference_grid.model_sizes)
        below = reference_grid.filter(lambda p: p.n < top)
        cap = max(below.model_sizes)
        ((_, rep),) = robustness_curve(reference_grid, top, [cap])
        params, _ = fit_farseer(below)
        direct = evaluate_held_out(params, [p for p in reference_grid if p.n == top])
        assert rep.held_out == direct.held_out

    def test_too_small_cap_skipped_with_warning(self, reference_grid):
        with pytest.warns(FitWarning, match="skipped"):
            curve = robustness_curve(reference_grid, 6.432e9, [2.01e8, 1.61e9])
        assert [cap for cap, _ in curve] == [1.61e9]

    def test_cap_must_exclude_held_out(self, reference_grid):
        with pytest.raises(ValueError):
            robustness_curve(reference_grid, 3.216e9, [4e9])

    def test_chinchilla_nonlinear_variant(self, reference_grid):
        curve = robustness_curve(reference_grid, 6.432e9, [3.3e9], "nonlinear", "chinchilla",
                                 MultiStartConfig(starts=8))
        assert len(curve) == 1 and curve[0][1].mean_rel_err > 0


class TestMonotonicity:
    def test_published_law_has_no_violations(self):
        rep = monotonicity_check(REFERENCE_FARSEER, (1e8, 1e12), (1e9, 1e13), 50)
        assert rep.ok and rep.checked == 5000

    def test_chinchilla_has_no_violations(self):
        assert monotonicity_check(ASYMMETRIC, samples_per_axis=20).ok

    def test_flipped_exponent_sign_reported(self):
        flipped = FarseerParams(**{**REFERENCE_FARSEER.as_dict(), "a1": 0.124})
        ns = np.geomspace(1e8, 1e12, 5)
        assert np.all(np.diff(flipped.exponent_of(ns)) > 0)  # A(N) now grows with N
        rep = monotonicity_check(flipped, samples_per_axis=20)
        assert not rep.ok
        # d^-A(N) underflows once A(N) is large, so the data slope vanishes to rounding
        assert any(v[0] == "d" and not v[3] < 0 for v in rep.violations)

    def test_invalid(self):
        with pytest.raises(ValueError):
            monotonicity_check(SYMMETRIC, samples_per_axis=1)


class TestDifferentialPerspectives:
    def test_data_difference_is_exact_power_law(self, reference_grid):
        out = differential_perspectives(reference_grid)
        assert set(out) == {"dD_vs_D", "dD_vs_N", "dN_vs_D", "dN_vs_N"}
        assert out["dD_vs_D"].available and abs(1 - out["dD_vs_D"].mean_r2) <= 1e-9
        assert all(p.available for p in out.values())

    def test_data_independent_surface(self):
        ns = ladder(1e8, 1e10, math.sqrt(2))
        ds = ladder(1e9, 1e11, math.sqrt(2))
        g = LossGrid([LossPoint(n, d, 0.5 + n**-0.1) for n in ns for d in ds])
        out = differential_perspectives(g)
        assert not out["dD_vs_D"].available and not out["dD_vs_N"].available
        for name in ("dN_vs_D",):
            assert all(abs(s) < 1e-9 for s in out[name].slopes)


class TestSurfaceCompare:
    def test_identical_laws(self):
        sd = surface_compare(REFERENCE_FARSEER, REFERENCE_FARSEER, resolution=10)
        assert np.all(sd.delta == 0) and not sd.zero_crossings

    def test_uniform_scaling(self):
        scaled = ChinchillaParams(1.02 * 400.0, 0.3, 1.02 * 400.0, 0.3, 1.02 * 1.7)
        sd = surface_compare(SYMMETRIC, scaled, resolution=8)
        assert sd.delta == pytest.approx(np.full((8, 8), -0.0196078431372549), abs=1e-15)

    def test_antisymmetric_sign(self):
        ab = surface_compare(REFERENCE_FARSEER, ASYMMETRIC, resolution=12)
        ba = surface_compare(ASYMMETRIC, REFERENCE_FARSEER, resolution=12)
        assert np.all(np.sign(ab.delta) == -np.sign(ba.delta))

    def test_crossing_between_small_and_large_scale(self):
        # b's residual term is higher at small n and lower at large n.
        other = FarseerParams(**{**REFERENCE_FARSEER.as_dict(), "a3": -0.0215, "b3": -0.071})
        sd = surface_compare(REFERENCE_FARSEER, other, resolution=30)
        assert sd.delta[0, 0] * sd.delta[-1, -1] < 0
        assert sd.zero_crossings
        for n, d in sd.zero_crossings:
            assert 1e8 <= n <= 1e12 and 1e9 <= d <= 1e13
            la, lb = evaluate(REFERENCE_FARSEER, n, d), evaluate(other, n, d)
            assert abs(la - lb) / lb < 2e-3  # linear interpolation lands near the true contour
