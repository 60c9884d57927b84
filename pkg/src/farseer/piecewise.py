"""Differential piecewise fitting of the Farseer law.

Stage 1 fits, per model size, a power law in ``d`` to the loss difference
``r = L(n, d) - L(n, lam * d)``; the difference cancels every term that
depends on ``n`` alone. Stage 2 parameterizes the
per-size exponents and coefficients as stretched exponentials in ``n`` and
refines their exponents against the global difference loss. Stage 3 averages
what remains of the loss over ``d`` and fits it as a third stretched exponential.

Convention: ``r`` is the loss at ``d`` minus the loss at ``lam * d``, so it is
positive on a surface that decreases in ``d``.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ChinchillaParams, FarseerParams, LossGrid, eval_chinchilla, eval_farseer
from .errors import FitFailedError, InsufficientDataError, ResidualSignError, SingularSystemError
from .regression import LinearFit, TransformKind, best_power_fit, linear_fit
from .search import coarse_exponent_grid
from .search import grid_minimize

PAIR_RTOL = 0.01
MIN_PAIRS = 3
MIN_MODEL_SIZES = 3
REFINE_RTOL = 1e-6
REFINE_MAX_ITER = 10
COARSE_MIN_ALPHA = 0.01


class FitWarning(UserWarning):
    pass


def _default_warn(msg: str) -> None:
    warnings.warn(msg, FitWarning, stacklevel=3)


@dataclass(frozen=True)
class DiffSeries:
    n: float
    d: np.ndarray
    r: np.ndarray
    dropped: int = 0

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.d.tolist(), self.r.tolist()))

    def __eq__(self, other):
        if not isinstance(other, DiffSeries):
            return NotImplemented
        return (
            self.n == other.n
            and self.dropped == other.dropped
            and self.d.tobytes() == other.d.tobytes()
            and self.r.tobytes() == other.r.tobytes()
        )


@dataclass(frozen=True)
class StretchedExp:
    """f(n) = exp(a * n**p + b)."""

    a: float
    b: float
    p: float

    def __call__(self, n):
        return np.exp(self.a * np.power(np.asarray(n, dtype=float), self.p) + self.b)

    def log(self, n):
        return self.a * np.power(np.asarray(n, dtype=float), self.p) + self.b


@dataclass(frozen=True)
class StageOneEntry:
    """Per-size estimates; ``fit`` is the log-space regression, ``ell`` the linear-space loss."""

    A: float
    B_hat: float
    B: float
    fit: LinearFit
    ell: float = math.nan


@dataclass
class StageOneResult:
    per_n: dict[float, StageOneEntry]
    excluded: dict[float, str] = field(default_factory=dict)

    @property
    def model_sizes(self) -> np.ndarray:
        return np.array(sorted(self.per_n))

    def arrays(self):
        """Return ``(n, A_N, B_N)`` sorted by model size."""
        ns = self.model_sizes
        return ns, np.array([self.per_n[n].A for n in ns]), np.array([self.per_n[n].B for n in ns])


@dataclass
class RefinementTrace:
    initial_ell_r: float = math.nan
    iterations: list[tuple[float, float, float]] = field(default_factory=list)
    converged: bool = False
    flags: list[str] = field(default_factory=list)


@dataclass
class ResidualDiagnostics:
    o_values: dict[tuple[float, float], float]
    g_values: dict[float, float]
    centered: dict[tuple[float, float], float]

    def centered_by_n(self) -> dict[float, np.ndarray]:
        out: dict[float, list[float]] = {}
        for (n, _), v in self.centered.items():
            out.setdefault(n, []).append(v)
        return {n: np.array(v) for n, v in out.items()}


@dataclass
class FitReport:
    """Fitted law with per-point predictions, error summaries and provenance."""

    law: object
    method: str
    n: np.ndarray
    d: np.ndarray
    actual: np.ndarray
    predicted: np.ndarray
    ell_r: float = math.nan
    stage1: StageOneResult | None = None
    trace: RefinementTrace | None = None
    diagnostics: ResidualDiagnostics | None = None
    warnings: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def rel_err(self) -> np.ndarray:
        return np.abs(self.predicted - self.actual) / self.actual

    @property
    def mean_rel_err(self) -> float:
        return float(np.mean(self.rel_err))

    @property
    def max_rel_err(self) -> float:
        return float(np.max(self.rel_err))

    @property
    def rss(self) -> float:
        res = self.predicted - self.actual
        return float(res @ res)


def _pair_index(d: np.ndarray, lam: float, rtol: float = PAIR_RTOL) -> np.ndarray:
    """For each d[i], the index of the point nearest lam * d[i] within rtol, else -1."""
    target = lam * d
    j = np.searchsorted(d, target)
    out = np.full(len(d), -1)
    for i, t in enumerate(target):
        best, best_err = -1, math.inf
        for k in (j[i] - 1, j[i]):
            if 0 <= k < len(d) and k != i:
                err = abs(d[k] - t)
                if err < best_err:
                    best, best_err = k, err
        if best >= 0 and best_err <= rtol * t:
            out[i] = best
    return out


def build_diff_series(grid: LossGrid, min_pairs: int = MIN_PAIRS,
                      warn: Callable[[str], None] | None = None) -> list[DiffSeries]:
    """Pair every d with lam * d at each model size and take loss differences."""
    warn = warn or _default_warn
    out = []
    for n, (d, loss) in sorted(grid.by_model_size().items()):
        idx = _pair_index(d, grid.lam)
        has = idx >= 0
        r = loss[has] - loss[idx[has]]
        keep = r > 0
        dropped = int(np.count_nonzero(~keep))
        if np.count_nonzero(keep) < min_pairs:
            warn(f"model size {n:.6g}: only {np.count_nonzero(keep)} positive loss differences, excluded")
            continue
        if dropped:
            warn(f"model size {n:.6g}: dropped {dropped} non-positive loss differences")
        out.append(DiffSeries(float(n), d[has][keep], r[keep], dropped))
    if not out:
        raise InsufficientDataError("no model size has enough positive loss differences")
    return out


def _weighted_line(x, z, w):
    w = w / np.sum(w)
    xm, zm = w @ x, w @ z
    dx = x - xm
    sxx = (w * dx) @ dx
    if not sxx > 0:
        raise SingularSystemError("abscissa has zero weighted variance")
    slope = ((w * dx) @ (z - zm)) / sxx
    return float(slope), float(zm - slope * xm)


def power_law_gauss_newton(x, r, slope, intercept, max_iter: int = 100, tol: float = 1e-13):
    """Minimize sum (r - exp(slope * x + intercept))**2 from a log-space start.

    Each step solves the weighted normal equations of the linearized model
    (weights exp(eta)**2, working response eta + (r - exp(eta)) / exp(eta)),
    halving the step whenever the loss would increase.
    """

    def loss(s, c):
        res = r - np.exp(s * x + c)
        return float(res @ res)

    current = loss(slope, intercept)
    for _ in range(max_iter):
        eta = slope * x + intercept
        pred = np.exp(eta)
        s_new, c_new = _weighted_line(x, eta + (r - pred) / pred, pred**2)
        ds, dc = s_new - slope, c_new - intercept
        for _ in range(40):
            trial = loss(slope + ds, intercept + dc)
            if trial <= current:
                break
            ds, dc = ds / 2, dc / 2
        else:
            break
        slope, intercept, current = slope + ds, intercept + dc, trial
        if abs(ds) <= tol * max(1.0, abs(slope)) and abs(dc) <= tol * max(1.0, abs(intercept)):
            break
    return slope, intercept, current


def stage1_fit(series: list[DiffSeries], lam: float, objective: str = "linear",
               warn: Callable[[str], None] | None = None) -> StageOneResult:
    """Per-size power law r = B_hat * d**(-A); recovers B = B_hat / (1 - lam**-A).

    ``objective="log"`` keeps the plain log-log normal-equation solution.
    ``objective="linear"`` starts there and minimizes the squared error of the
    differences themselves, which stops small, noisy differences at large d
    from dominating the slope.
    """
    if objective not in ("linear", "log"):
        raise ValueError(f"unknown stage-1 objective {objective!r}")
    warn = warn or _default_warn
    result = StageOneResult({})
    for s in series:
        x = np.log(s.d)
        try:
            fit = linear_fit(x, np.log(s.r))
            slope, intercept = fit.slope, fit.intercept
            if objective == "linear":
                slope, intercept, ell = power_law_gauss_newton(x, s.r, slope, intercept)
            else:
                res = s.r - np.exp(slope * x + intercept)
                ell = float(res @ res)
        except SingularSystemError:
            result.excluded[s.n] = "singular regression"
            warn(f"model size {s.n:.6g}: singular difference regression, excluded")
            continue
        a = -slope
        if a <= 0:
            result.excluded[s.n] = f"non-positive data exponent {a:.6g}"
            warn(f"model size {s.n:.6g}: data exponent {a:.6g} <= 0, excluded from parameterization")
            continue
        b_hat = math.exp(intercept)
        result.per_n[s.n] = StageOneEntry(a, b_hat, b_hat / (1.0 - lam ** (-a)), fit, ell)
    return result


class _DiffData:
    """Flattened difference pairs for fast evaluation of the global difference loss."""

    def __init__(self, series: list[DiffSeries], sizes):
        keep = [s for s in series if s.n in set(sizes)]
        self.n = np.concatenate([np.full(len(s.d), s.n) for s in keep])
        self.log_d = np.log(np.concatenate([s.d for s in keep]))
        self.r = np.concatenate([s.r for s in keep])

    def ell_r(self, f_a: StretchedExp, f_b: StretchedExp, lam: float) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            a = f_a(self.n)
            pred = f_b(self.n) * (1.0 - lam ** (-a)) * np.exp(-a * self.log_d)
            res = self.r - pred
            v = float(res @ res)
        return v if math.isfinite(v) else math.inf


def _projection_fit(ns, values, p) -> StretchedExp:
    fit = linear_fit(np.power(ns, p), np.log(values))
    return StretchedExp(fit.slope, fit.intercept, p)


def _initial_exponent(ns, values, power_grid):
    logv = np.log(values)

    def rss(p):
        try:
            return linear_fit(np.power(ns, p), logv).rss
        except SingularSystemError:
            return math.inf

    p, _ = grid_minimize(rss, power_grid)
    return _projection_fit(ns, values, p)


def _flat(values) -> bool:
    logv = np.log(values)
    return float(np.ptp(logv)) <= 1e-12 * max(1.0, float(np.max(np.abs(logv))))


def stage2_parameterize(s1: StageOneResult, series: list[DiffSeries], lam: float,
                        power_grid=None, rtol: float = REFINE_RTOL,
                        max_iter: int = REFINE_MAX_ITER):
    """Fit A(n), B(n) as stretched exponentials and refine their exponents.

    Returns ``(f_A, f_B, trace)``. The exponents alternate: each candidate
    re-fits its (a, b) pair on the per-size values, and the candidate with the
    smallest global difference loss is kept.
    """
    ns, a_n, b_n = s1.arrays()
    if len(ns) < MIN_MODEL_SIZES:
        raise InsufficientDataError(
            f"parameterization needs at least {MIN_MODEL_SIZES} model sizes, got {len(ns)}"
        )
    trace = RefinementTrace()
    if _flat(a_n):
        trace.flags.append("alpha unidentifiable: A_N constant over model sizes")
    if _flat(b_n):
        trace.flags.append("beta unidentifiable: B_N constant over model sizes")

    f_a = _initial_exponent(ns, a_n, power_grid)
    f_b = _initial_exponent(ns, b_n, power_grid)
    data = _DiffData(series, ns)
    ell = data.ell_r(f_a, f_b, lam)
    trace.initial_ell_r = ell

    def refine(current, values, loss_of):
        best, best_v = current, loss_of(current)

        def objective(p):
            try:
                return loss_of(_projection_fit(ns, values, p))
            except SingularSystemError:
                return math.inf

        p, v = grid_minimize(objective, power_grid)
        if math.isfinite(v) and v < best_v:
            best, best_v = _projection_fit(ns, values, p), v
        return best, best_v

    for _ in range(max_iter):
        prev = ell
        f_a, _ = refine(f_a, a_n, lambda fa: data.ell_r(fa, f_b, lam))
        f_b, ell = refine(f_b, b_n, lambda fb: data.ell_r(f_a, fb, lam))
        trace.iterations.append((f_a.p, f_b.p, ell))
        if prev - ell <= rtol * prev:
            trace.converged = True
            break
    return f_a, f_b, trace


def stage3_fit_residual(grid: LossGrid, f_a: StretchedExp, f_b: StretchedExp, power_grid=None):
    """Average L - B(n) d^-A(n) over d per model size and fit it as exp(a3 n^gamma + b3)."""
    o_values, g_values, centered = {}, {}, {}
    for n, (d, loss) in sorted(grid.by_model_size().items()):
        o = loss - f_b(n) * np.power(d, -f_a(n))
        g = float(np.mean(o))
        if not g > 0:
            raise ResidualSignError(
                f"averaged residual G(n) = {g:.6g} <= 0 at model size {n:.6g}; "
                "the data term is misfit"
            )
        g_values[float(n)] = g
        for di, oi in zip(d, o):
            o_values[(float(n), float(di))] = float(oi)
            centered[(float(n), float(di))] = float(oi - g)
    ns = np.array(sorted(g_values))
    gs = np.array([g_values[n] for n in ns])
    if len(ns) < 2:
        raise InsufficientDataError("residual fit needs at least 2 model sizes")
    f_u = _initial_exponent(ns, gs, power_grid)
    return f_u, ResidualDiagnostics(o_values, g_values, centered)


def assemble(f_a: StretchedExp, f_b: StretchedExp, f_u: StretchedExp) -> FarseerParams:
    return FarseerParams(
        a1=f_a.a, b1=f_a.b, alpha=f_a.p,
        a2=f_b.a, b2=f_b.b, beta=f_b.p,
        a3=f_u.a, b3=f_u.b, gamma=f_u.p,
    )


def fit_farseer(grid: LossGrid, power_grid=None,
                stage1_objective: str = "linear") -> tuple[FarseerParams, FitReport]:
    """Run the three stages on ``grid`` and report the fitted law."""
    start = time.perf_counter()
    notes: list[str] = []
    series = build_diff_series(grid, warn=notes.append)
    s1 = stage1_fit(series, grid.lam, stage1_objective, warn=notes.append)
    f_a, f_b, trace = stage2_parameterize(s1, series, grid.lam, power_grid)
    notes.extend(trace.flags)
    if not trace.converged:
        notes.append("exponent refinement hit the iteration cap before converging")
    f_u, diag = stage3_fit_residual(grid, f_a, f_b, power_grid)
    params = assemble(f_a, f_b, f_u)
    n, d, loss = grid.arrays()
    report = FitReport(
        law=params,
        method="piecewise",
        n=n, d=d, actual=loss,
        predicted=np.asarray(eval_farseer(params, n, d), dtype=float),
        ell_r=trace.iterations[-1][2] if trace.iterations else trace.initial_ell_r,
        stage1=s1,
        trace=trace,
        diagnostics=diag,
        warnings=notes,
        provenance={
            "method": "piecewise",
            "family": "farseer",
            "lambda": grid.lam,
            "stage1_objective": stage1_objective,
            "points": len(grid),
            "model_sizes_used": len(s1.per_n),
            "dropped_differences": int(sum(s.dropped for s in series)),
            "seconds": time.perf_counter() - start,
        },
    )
    return params, report


def fit_chinchilla_piecewise(grid: LossGrid,
                             stage1_objective: str = "linear") -> tuple[ChinchillaParams, FitReport]:
    """Staged fit of A / n^alpha + B / d^beta + E using the same differencing idea.

    The data term of this family does not depend on ``n``, so the differences
    of every model size are pooled into one power law giving ``(B, beta)``.
    What remains, averaged over ``d``, is fitted as ``A * n**-alpha + E`` by a
    linear fit against ``n**-alpha`` over a grid of positive ``alpha``.
    """
    if stage1_objective not in ("linear", "log"):
        raise ValueError(f"unknown stage-1 objective {stage1_objective!r}")
    start = time.perf_counter()
    notes: list[str] = []
    series = build_diff_series(grid, warn=notes.append)
    x = np.log(np.concatenate([s.d for s in series]))
    r = np.concatenate([s.r for s in series])
    fit = linear_fit(x, np.log(r))
    slope, intercept = fit.slope, fit.intercept
    if stage1_objective == "linear":
        slope, intercept, _ = power_law_gauss_newton(x, r, slope, intercept)
    beta = -slope
    if not beta > 0:
        raise FitFailedError(f"pooled data exponent {beta:.6g} is not positive")
    big_b = math.exp(intercept) / (1.0 - grid.lam ** (-beta))

    g_values = {}
    for n, (d, loss) in sorted(grid.by_model_size().items()):
        g_values[float(n)] = float(np.mean(loss - big_b * np.power(d, -beta)))
    ns = np.array(sorted(g_values))
    gs = np.array([g_values[n] for n in ns])
    if len(ns) < MIN_MODEL_SIZES:
        raise InsufficientDataError(
            f"residual fit needs at least {MIN_MODEL_SIZES} model sizes, got {len(ns)}"
        )
    negative = coarse_exponent_grid(-1.0, -COARSE_MIN_ALPHA)
    found = best_power_fit(ns, gs, TransformKind.identity(), negative)
    if found is None:
        raise FitFailedError("no feasible model-size exponent")
    power, line = found
    params = ChinchillaParams(A=line.slope, alpha=-power.exponent, B=big_b, beta=beta, E=line.intercept)
    if params.A < 0 or params.E < 0:
        raise FitFailedError(f"staged fit produced negative coefficients (A={params.A:.6g}, E={params.E:.6g})")
    n, d, loss = grid.arrays()
    report = FitReport(
        law=params,
        method="piecewise",
        n=n, d=d, actual=loss,
        predicted=np.asarray(eval_chinchilla(params, n, d), dtype=float),
        warnings=notes,
        provenance={
            "method": "piecewise",
            "family": "chinchilla",
            "lambda": grid.lam,
            "stage1_objective": stage1_objective,
            "points": len(grid),
            "model_sizes_used": len(ns),
            "dropped_differences": int(sum(s.dropped for s in series)),
            "seconds": time.perf_counter() - start,
        },
    )
    return params, report
