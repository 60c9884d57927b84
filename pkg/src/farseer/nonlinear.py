"""End-to-end multi-start nonlinear least squares for both law families.

Each start draws an initial point from per-parameter ranges and runs a
box-projected Levenberg-Marquardt descent with analytic Jacobians. Only
steps that lower the objective are accepted, so every run's objective history
is non-increasing. Start ``k`` draws from an RNG stream keyed by
``(seed, k)``, so results do not depend on execution order or thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import REFERENCE_FARSEER, ChinchillaParams, FarseerParams, LossGrid
from .errors import FitFailedError

EXP_LIMIT = 700.0
POSITIVE_FLOOR = 1e-12

# Chinchilla: E uniform, A and B log-uniform, exponents uniform.
CHINCHILLA_INIT = {
    "A": (1e-1, 1e3),
    "alpha": (0.05, 1.0),
    "B": (1e-1, 1e3),
    "beta": (0.05, 1.0),
    "E": (0.0, 2.0),
}
CHINCHILLA_LOG_UNIFORM = ("A", "B")


def farseer_init_ranges(center: FarseerParams = REFERENCE_FARSEER, decades: float = 1.0) -> dict:
    """One-decade magnitude jitter around ``center``, sign preserved."""
    out = {}
    for name, v in center.as_dict().items():
        lo, hi = sorted((v * 10**-decades, v * 10**decades))
        out[name] = (lo, hi)
    return out


@dataclass(frozen=True)
class MultiStartConfig:
    starts: int = 256
    seed: int = 0
    init_ranges: dict | None = None
    max_steps: int = 2000
    step_tolerance: float = 1e-10
    objective: str = "squared"
    workers: int | None = None

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError("starts must be >= 1")
        if self.objective not in ("squared", "squared-log"):
            raise ValueError(f"unknown objective {self.objective!r}")
        for name, (lo, hi) in (self.init_ranges or {}).items():
            if not lo < hi:
                raise ValueError(f"init range for {name} must satisfy lo < hi")


@dataclass
class NonlinearFitResult:
    params: FarseerParams | ChinchillaParams
    objective: float
    start_index: int
    all_objectives: np.ndarray
    histories: list[list[float]] = field(default_factory=list, repr=False)
    provenance: dict = field(default_factory=dict)


class _Model:
    names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __init__(self, grid: LossGrid):
        n, d, loss = grid.arrays()
        self.n, self.d, self.loss = n, d, loss
        self.log_n, self.log_d = np.log(n), np.log(d)

    def project(self, p):
        return np.clip(p, self.lower, self.upper)


class _FarseerModel(_Model):
    names = FarseerParams.NAMES
    lower = np.full(9, -np.inf)
    upper = np.full(9, np.inf)
    make = staticmethod(FarseerParams.from_array)

    def predict_and_jac(self, p, want_jac=True):
        a1, b1, alpha, a2, b2, beta, a3, b3, gamma = p
        with np.errstate(over="ignore", invalid="ignore"):
            n_al, n_be, n_ga = (np.exp(e * self.log_n) for e in (alpha, beta, gamma))
            w = a1 * n_al + b1
            u = a3 * n_ga + b3
        if not (np.all(np.abs(w) <= EXP_LIMIT) and np.all(np.abs(u) <= EXP_LIMIT)):
            return None, None
        a_exp = np.exp(w)
        with np.errstate(over="ignore", invalid="ignore"):
            log_t = a2 * n_be + b2 - a_exp * self.log_d
        if not np.all(np.abs(log_t) <= EXP_LIMIT):
            return None, None
        t = np.exp(log_t)
        big_u = np.exp(u)
        pred = big_u + t
        if not want_jac:
            return pred, None
        dw = -t * a_exp * self.log_d
        jac = np.column_stack([
            dw * n_al, dw, dw * a1 * n_al * self.log_n,
            t * n_be, t, t * a2 * n_be * self.log_n,
            big_u * n_ga, big_u, big_u * a3 * n_ga * self.log_n,
        ])
        return pred, jac


class _ChinchillaModel(_Model):
    names = ChinchillaParams.NAMES
    lower = np.array([0.0, POSITIVE_FLOOR, 0.0, POSITIVE_FLOOR, 0.0])
    upper = np.full(5, np.inf)
    make = staticmethod(ChinchillaParams.from_array)

    def predict_and_jac(self, p, want_jac=True):
        A, alpha, B, beta, E = p
        with np.errstate(over="ignore", under="ignore"):
            n_term = np.exp(-alpha * self.log_n)
            d_term = np.exp(-beta * self.log_d)
        pred = A * n_term + B * d_term + E
        if not np.all(np.isfinite(pred)):
            return None, None
        if not want_jac:
            return pred, None
        jac = np.column_stack([
            n_term, -A * n_term * self.log_n, d_term, -B * d_term * self.log_d, np.ones_like(pred),
        ])
        return pred, jac


def _residuals(model, p, objective, want_jac=True):
    pred, jac = model.predict_and_jac(p, want_jac)
    if pred is None:
        return None, None
    if objective == "squared":
        return pred - model.loss, jac
    if np.any(pred <= 0):
        return None, None
    res = np.log(pred) - np.log(model.loss)
    return res, (jac / pred[:, None] if jac is not None else None)


def _sum_sq(res) -> float:
    if res is None:
        return math.inf
    with np.errstate(over="ignore", invalid="ignore"):
        v = float(res @ res)
    return v if math.isfinite(v) else math.inf


def levenberg_marquardt(model, p0, free, objective="squared", max_steps=2000, step_tolerance=1e-10):
    """Projected LM over the ``free`` coordinates of ``p0``.

    Returns ``(params, objective, history)`` where ``history`` holds the
    objective after every accepted step (starting with the initial value).
    """
    p = model.project(np.array(p0, dtype=float))
    res, jac = _residuals(model, p, objective)
    f = _sum_sq(res)
    if not math.isfinite(f):
        return p, math.inf, [math.inf]
    history = [f]
    damping = 1e-3
    for _ in range(max_steps):
        jf = jac[:, free]
        g = jf.T @ res
        h = jf.T @ jf
        scale = np.maximum(np.diag(h), 1e-300)
        accepted = False
        while damping < 1e20:
            try:
                delta = np.linalg.solve(h + damping * np.diag(scale), -g)
            except np.linalg.LinAlgError:
                damping *= 10
                continue
            trial = p.copy()
            trial[free] += delta
            trial = model.project(trial)
            t_res, _ = _residuals(model, trial, objective, want_jac=False)
            t_f = _sum_sq(t_res)
            if t_f < f:
                accepted = True
                break
            damping *= 4
        if not accepted:
            break
        step = np.linalg.norm(trial - p)
        p = trial
        res, jac = _residuals(model, p, objective)
        f_prev, f = f, t_f
        history.append(f)
        damping = max(damping / 3, 1e-15)
        if step <= step_tolerance * (np.linalg.norm(p) + step_tolerance):
            break
        if f_prev - f <= 1e-15 * f_prev:
            break
    return p, f, history


def _sample(rng, names, ranges, log_uniform):
    out = np.empty(len(names))
    for i, name in enumerate(names):
        lo, hi = ranges[name]
        if name in log_uniform and lo > 0:
            out[i] = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        elif lo * hi > 0 and name in log_uniform:
            small, large = sorted((abs(lo), abs(hi)))
            out[i] = math.copysign(math.exp(rng.uniform(math.log(small), math.log(large))), lo)
        else:
            out[i] = rng.uniform(lo, hi)
    return out


def _multistart(model, cfg: MultiStartConfig, ranges, log_uniform, fixed, initial):
    names = model.names
    free = np.array([name not in fixed for name in names])
    if not free.any():
        raise ValueError("at least one parameter must be free")

    def run(k):
        if initial is not None and k == 0:
            p0 = np.array(initial, dtype=float)
        else:
            p0 = _sample(np.random.default_rng([cfg.seed, k]), names, ranges, log_uniform)
        for i, name in enumerate(names):
            if name in fixed:
                p0[i] = fixed[name]
        return levenberg_marquardt(model, p0, free, cfg.objective, cfg.max_steps, cfg.step_tolerance)

    workers = cfg.workers or int(os.environ.get("FARSEER_THREADS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            runs = list(pool.map(run, range(cfg.starts)))
    else:
        runs = [run(k) for k in range(cfg.starts)]
    objectives = np.array([f for _, f, _ in runs])
    if not np.any(np.isfinite(objectives)):
        raise FitFailedError(
            f"all {cfg.starts} starts diverged (first start history: {runs[0][2][:3]})"
        )
    best = int(np.argmin(np.where(np.isfinite(objectives), objectives, np.inf)))
    return NonlinearFitResult(
        params=model.make(runs[best][0]),
        objective=float(objectives[best]),
        start_index=best,
        all_objectives=objectives,
        histories=[h for _, _, h in runs],
        provenance={
            "method": "nonlinear",
            "local_optimizer": "projected Levenberg-Marquardt",
            "objective": cfg.objective,
            "starts": cfg.starts,
            "seed": cfg.seed,
            "max_steps": cfg.max_steps,
            "step_tolerance": cfg.step_tolerance,
            "fixed": dict(fixed),
        },
    )


def fit_chinchilla_nonlinear(grid: LossGrid, cfg: MultiStartConfig = MultiStartConfig(),
                             fixed: dict | None = None, initial=None) -> NonlinearFitResult:
    """Fit A / n^alpha + B / d^beta + E with A, B, E >= 0 and alpha, beta > 0.

    ``fixed`` pins named parameters; ``initial`` replaces the first start.
    """
    ranges = {**CHINCHILLA_INIT, **(cfg.init_ranges or {})}
    return _multistart(_ChinchillaModel(grid), cfg, ranges, CHINCHILLA_LOG_UNIFORM, fixed or {}, initial)


def fit_farseer_nonlinear(grid: LossGrid, cfg: MultiStartConfig = MultiStartConfig(),
                          fixed: dict | None = None, initial=None) -> NonlinearFitResult:
    """Fit all nine Farseer coefficients jointly.

    Kept as the baseline the piecewise procedure is compared against; starts
    are drawn with one-decade magnitude jitter around the published coefficients.
    """
    ranges = {**farseer_init_ranges(), **(cfg.init_ranges or {})}
    return _multistart(_FarseerModel(grid), cfg, ranges, FarseerParams.NAMES, fixed or {}, initial)
