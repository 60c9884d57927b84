"""What to do with a fitted law: allocation, extrapolation checks, diagnostics.

Everything here is a pure function of its inputs. Compute is modelled as
``C = flop_factor * n * d`` with ``flop_factor = 6`` by default.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ChinchillaParams, FarseerParams, LossGrid, LossPoint, evaluate
from .errors import EvaluationError, FarseerError, InsufficientDataError
from .nonlinear import MultiStartConfig, fit_chinchilla_nonlinear, fit_farseer_nonlinear
from .piecewise import PAIR_RTOL, FitReport, FitWarning, _pair_index, fit_chinchilla_piecewise, fit_farseer
from .regression import linear_fit
from .search import golden_section

FLOP_FACTOR = 6.0
N_BRACKET = (1e6, 1e14)
ALLOCATION_RTOL = 1e-6
BRACKET_SCAN = 257

Law = FarseerParams | ChinchillaParams


# --------------------------------------------------------------------------
# Fitting dispatch


def fit_law(grid: LossGrid, family: str = "farseer", method: str = "piecewise",
            cfg: MultiStartConfig | None = None) -> tuple[Law, FitReport]:
    """Fit ``family`` to ``grid`` with ``method``; always returns a FitReport."""
    if family not in ("farseer", "chinchilla"):
        raise ValueError(f"unknown family {family!r}")
    if method == "piecewise":
        return fit_farseer(grid) if family == "farseer" else fit_chinchilla_piecewise(grid)
    if method != "nonlinear":
        raise ValueError(f"unknown method {method!r}")
    cfg = cfg or MultiStartConfig()
    fitter = fit_farseer_nonlinear if family == "farseer" else fit_chinchilla_nonlinear
    result = fitter(grid, cfg)
    n, d, loss = grid.arrays()
    report = FitReport(
        law=result.params,
        method="nonlinear",
        n=n, d=d, actual=loss,
        predicted=np.asarray(evaluate(result.params, n, d), dtype=float),
        provenance={**result.provenance, "family": family, "objective_value": result.objective,
                    "start_index": result.start_index, "points": len(grid)},
    )
    return result.params, report


# --------------------------------------------------------------------------
# Compute-optimal allocation


@dataclass(frozen=True)
class AllocationPoint:
    c: float
    n_star: float
    d_star: float
    ratio: float
    loss_at_opt: float
    at_boundary: bool = False


def _loss_on_budget(law, c, flop_factor):
    def f(log_n):
        n = math.exp(log_n)
        try:
            return float(evaluate(law, n, c / (flop_factor * n)))
        except EvaluationError:
            return math.inf
    return f


def optimal_allocation(law: Law, c: float, flop_factor: float = FLOP_FACTOR,
                       bracket: tuple[float, float] = N_BRACKET,
                       rtol: float = ALLOCATION_RTOL) -> AllocationPoint:
    """Minimize loss at fixed compute by golden-section search over log n.

    The loss along a budget line need not be unimodal over the whole bracket,
    so a coarse log-spaced scan first picks the best cell and golden-section
    search then refines within its two neighbours. A minimizer within a few
    widths of either bracket end sets ``at_boundary`` (and warns) instead of
    being silently clamped.
    """
    if not (c > 0 and math.isfinite(c)):
        raise ValueError(f"compute budget must be positive, got {c!r}")
    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    f = _loss_on_budget(law, c, flop_factor)
    xs = np.linspace(lo, hi, BRACKET_SCAN)
    k = int(np.argmin([f(x) for x in xs]))
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, len(xs) - 1)]
    log_n, loss = golden_section(f, float(a), float(b), rtol)
    for edge in (lo, hi):
        if a <= edge <= b and f(edge) < loss:
            log_n, loss = edge, f(edge)
    n_star = math.exp(log_n)
    d_star = c / (flop_factor * n_star)
    boundary = min(log_n - lo, hi - log_n) <= 10 * rtol
    if boundary:
        warnings.warn(f"optimal model size for C={c:.3g} lies on the search boundary", FitWarning,
                      stacklevel=2)
    return AllocationPoint(c, n_star, d_star, d_star / n_star, loss, boundary)


def allocation_sweep(law: Law, c_values: Sequence[float], flop_factor: float = FLOP_FACTOR):
    c_values = [float(c) for c in c_values]
    if any(b < a for a, b in zip(c_values, c_values[1:])):
        raise ValueError("budgets must be sorted ascending")
    return [optimal_allocation(law, c, flop_factor) for c in c_values]


def budgets_per_decade(c_min: float, c_max: float, per_decade: int = 1) -> np.ndarray:
    """Log-spaced budgets from c_min to c_max inclusive."""
    if not (0 < c_min <= c_max) or per_decade < 1:
        raise ValueError("need 0 < c_min <= c_max and per_decade >= 1")
    steps = int(round(math.log10(c_max / c_min) * per_decade))
    return c_min * 10.0 ** (np.arange(steps + 1) / per_decade)


# --------------------------------------------------------------------------
# Held-out evaluation and robustness


@dataclass
class EvalReport:
    held_out: list[tuple[float, float, float, float, float]]
    mean_rel_err: float
    max_rel_err: float
    fit_subset_description: str = ""


def evaluate_held_out(law: Law, points: Sequence[LossPoint], description: str = "") -> EvalReport:
    """Relative error ``|pred - actual| / actual`` at each point."""
    points = list(points)
    if not points:
        raise ValueError("no points to evaluate")
    rows = []
    for p in points:
        pred = float(evaluate(law, p.n, p.d))
        rows.append((p.n, p.d, p.loss, pred, abs(pred - p.loss) / p.loss))
    errs = np.array([r[4] for r in rows])
    return EvalReport(rows, float(np.mean(errs)), float(np.max(errs)), description)


def robustness_curve(grid: LossGrid, held_out_n: float, caps: Sequence[float],
                     method: str = "piecewise", family: str = "farseer",
                     cfg: MultiStartConfig | None = None) -> list[tuple[float, EvalReport]]:
    """Fit on ``{n <= cap}`` for every cap and score each fit at ``held_out_n``.

    Caps whose subset cannot be fitted are skipped with a warning.
    """
    target = [p for p in grid if math.isclose(p.n, held_out_n, rel_tol=PAIR_RTOL)]
    if not target:
        raise InsufficientDataError(f"no points at held-out model size {held_out_n:.6g}")
    held_n = target[0].n
    out = []
    for cap in caps:
        if cap >= held_n:
            raise ValueError(f"cap {cap:.6g} does not exclude the held-out size {held_n:.6g}")
        subset = grid.filter(lambda p, cap=cap: p.n <= cap)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", FitWarning)
                law, _ = fit_law(subset, family, method, cfg)
            report = evaluate_held_out(law, target, f"{family}/{method} fitted on n <= {cap:.6g} "
                                                    f"({len(subset)} points)")
        except (FarseerError, ValueError) as exc:
            warnings.warn(f"cap {cap:.6g} skipped: {exc}", FitWarning, stacklevel=2)
            continue
        out.append((float(cap), report))
    return out


# --------------------------------------------------------------------------
# Monotonicity


@dataclass
class MonotonicityReport:
    violations: list[tuple[str, float, float, float]]
    checked: int
    step: float

    @property
    def ok(self) -> bool:
        return not self.violations


def monotonicity_check(law: Law, n_range=(1e8, 1e12), d_range=(1e9, 1e13),
                       samples_per_axis: int = 50, step: float = 1e-4) -> MonotonicityReport:
    """Central differences of L along log n and log d on a log-spaced lattice.

    Every non-negative derivative estimate is listed as ``(axis, n, d, estimate)``;
    evaluation failures are listed with a NaN estimate.
    """
    if samples_per_axis < 2 or min(*n_range, *d_range) <= 0:
        raise ValueError("need positive ranges and at least 2 samples per axis")
    ns = np.geomspace(*n_range, samples_per_axis)
    ds = np.geomspace(*d_range, samples_per_axis)
    up, down = math.exp(step), math.exp(-step)
    violations = []
    for n in ns:
        for d in ds:
            for axis, (hi, lo) in (("n", ((n * up, d), (n * down, d))), ("d", ((n, d * up), (n, d * down)))):
                try:
                    deriv = (evaluate(law, *hi) - evaluate(law, *lo)) / (2 * step)
                except EvaluationError:
                    deriv = math.nan
                if not deriv < 0:
                    violations.append((axis, float(n), float(d), float(deriv)))
    return MonotonicityReport(violations, 2 * len(ns) * len(ds), step)


# --------------------------------------------------------------------------
# Differential perspectives


PERSPECTIVES = ("dD_vs_D", "dD_vs_N", "dN_vs_D", "dN_vs_N")


@dataclass
class PerspectiveSummary:
    name: str
    available: bool
    mean_r2: float = math.nan
    series: int = 0
    slopes: list[float] = field(default_factory=list)


def _differences(grid: LossGrid, axis: str):
    """Map (n, d) -> L(n, d) - L(lam * n, d) or L(n, d) - L(n, lam * d)."""
    table = {(p.n, p.d): p.loss for p in grid}
    out = {}
    if axis == "d":
        for n, (d, loss) in grid.by_model_size().items():
            idx = _pair_index(d, grid.lam)
            for i, j in enumerate(idx):
                if j >= 0:
                    out[(n, float(d[i]))] = float(loss[i] - loss[j])
    else:
        by_d: dict[float, list[float]] = {}
        for n, d in table:
            by_d.setdefault(d, []).append(n)
        for d, ns in by_d.items():
            ns = np.array(sorted(ns))
            idx = _pair_index(ns, grid.lam)
            for i, j in enumerate(idx):
                if j >= 0:
                    out[(float(ns[i]), d)] = table[(ns[i], d)] - table[(ns[j], d)]
    return out


def _perspective(name, diffs, group_by, min_points=3):
    groups: dict[float, list[tuple[float, float]]] = {}
    for (n, d), r in diffs.items():
        if r > 0:
            key, x = (n, d) if group_by == "n" else (d, n)
            groups.setdefault(key, []).append((x, r))
    r2s, slopes = [], []
    for key in sorted(groups):
        pts = sorted(groups[key])
        if len(pts) < min_points:
            continue
        x = np.log([p[0] for p in pts])
        y = np.log([p[1] for p in pts])
        try:
            fit = linear_fit(x, y)
        except FarseerError:
            continue
        r2s.append(fit.r2)
        slopes.append(fit.slope)
    if not r2s:
        return PerspectiveSummary(name, False)
    return PerspectiveSummary(name, True, float(np.mean(r2s)), len(r2s), slopes)


def differential_perspectives(grid: LossGrid) -> dict[str, PerspectiveSummary]:
    """Log-log regressions of both finite differences against both axes.

    Each perspective regresses positive differences within groups of fixed
    ``n`` (against ``d``) or fixed ``d`` (against ``n``) and reports the mean
    r-squared over groups with at least three points.
    """
    dd = _differences(grid, "d")
    dn = _differences(grid, "n")
    return {
        "dD_vs_D": _perspective("dD_vs_D", dd, "n"),
        "dD_vs_N": _perspective("dD_vs_N", dd, "d"),
        "dN_vs_D": _perspective("dN_vs_D", dn, "n"),
        "dN_vs_N": _perspective("dN_vs_N", dn, "d"),
    }


# --------------------------------------------------------------------------
# Surface comparison


@dataclass
class SurfaceDelta:
    n: np.ndarray
    d: np.ndarray
    delta: np.ndarray  # shape (len(n), len(d))
    zero_crossings: list[tuple[float, float]]

    def rows(self):
        for i, n in enumerate(self.n):
            for j, d in enumerate(self.d):
                yield float(n), float(d), float(self.delta[i, j])


def _crossing(x0, x1, v0, v1):
    """Zero of the line through (x0, v0), (x1, v1) in log space."""
    t = v0 / (v0 - v1)
    return math.exp(math.log(x0) + t * (math.log(x1) - math.log(x0)))


def surface_compare(law_a: Law, law_b: Law, n_range=(1e8, 1e12), d_range=(1e9, 1e13),
                    resolution: int = 50) -> SurfaceDelta:
    """``(L_a - L_b) / L_b`` on a log lattice, plus where it changes sign.

    Crossings are located on every lattice edge whose endpoints have strictly
    opposite signs, by linear interpolation in log coordinates.
    """
    if resolution < 2 or min(*n_range, *d_range) <= 0:
        raise ValueError("need positive ranges and resolution >= 2")
    ns = np.geomspace(*n_range, resolution)
    ds = np.geomspace(*d_range, resolution)
    N, D = np.meshgrid(ns, ds, indexing="ij")
    la = np.asarray(evaluate(law_a, N, D), dtype=float)
    lb = np.asarray(evaluate(law_b, N, D), dtype=float)
    delta = (la - lb) / lb
    crossings = []
    for i in range(resolution):
        for j in range(resolution):
            v = delta[i, j]
            if j + 1 < resolution and v * delta[i, j + 1] < 0:
                crossings.append((float(ns[i]), _crossing(ds[j], ds[j + 1], v, delta[i, j + 1])))
            if i + 1 < resolution and v * delta[i + 1, j] < 0:
                crossings.append((_crossing(ns[i], ns[i + 1], v, delta[i + 1, j]), float(ds[j])))
    return SurfaceDelta(ns, ds, delta, crossings)


__all__ = [
    "AllocationPoint", "EvalReport", "MonotonicityReport", "PerspectiveSummary", "SurfaceDelta",
    "allocation_sweep", "budgets_per_decade", "differential_perspectives", "evaluate_held_out",
    "fit_law", "monotonicity_check", "optimal_allocation", "robustness_curve",
    "surface_compare",
]
