"""Transformed-space linear regression and transform selection.

A small dictionary of monotone transforms (identity, log, power) is applied to
the response and abscissa; every pair is fitted by ordinary least squares and
the pair with the smallest residual sum of squares wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NoFeasibleTransformError, SingularSystemError, TransformDomainError
from .search import coarse_exponent_grid, grid_minimize

_KIND_ORDER = {"identity": 0, "log": 1, "power": 2}
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class TransformKind:
    """One transform of the dictionary.

    ``power`` with ``exponent=None`` is a template: on the abscissa it is expanded
    over the exponent grid during selection.
    """

    kind: str
    exponent: float | None = None

    def __post_init__(self):
        if self.kind not in _KIND_ORDER:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind == "power" and self.exponent is not None:
            if not math.isfinite(self.exponent) or self.exponent == 0:
                raise ValueError("power exponent must be finite and nonzero")

    @classmethod
    def identity(cls) -> TransformKind:
        return cls("identity")

    @classmethod
    def log(cls) -> TransformKind:
        return cls("log")

    @classmethod
    def power(cls, exponent: float | None = None) -> TransformKind:
        return cls("power", exponent)

    @property
    def n_params(self) -> int:
        return 1 if self.kind == "power" else 0

    def sort_key(self):
        return (self.n_params, _KIND_ORDER[self.kind], self.exponent or 0.0)

    def __str__(self) -> str:
        if self.kind == "power":
            return "power" if self.exponent is None else f"power({self.exponent:g})"
        return self.kind


DEFAULT_DICTIONARY = (TransformKind.identity(), TransformKind.log(), TransformKind.power())


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    residuals: np.ndarray
    rss: float
    r2: float

    def predict(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept


@dataclass(frozen=True)
class TransformSelection:
    gy: TransformKind
    gx: TransformKind
    fit: LinearFit
    loss: float
    # best result for every (gy, gx) pair tried, keyed by (str(gy), kind of gx)
    candidates: dict | None = None


def linear_fit(xs, ys) -> LinearFit:
    """Least-squares line through ``(xs, ys)`` via mean-centred normal equations."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-d and of equal length")
    if len(x) < 2:
        raise ValueError("need at least two points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite input to linear_fit")
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    if sxx == 0.0 or not math.isfinite(sxx):
        raise SingularSystemError("abscissa has zero variance")
    dy = y - ym
    slope = float(dx @ dy) / sxx
    intercept = float(ym - slope * xm)
    residuals = y - (slope * x + intercept)
    rss = float(residuals @ residuals)
    tss = float(dy @ dy)
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return LinearFit(slope, intercept, residuals, rss, min(r2, 1.0))


def apply_transform(t: TransformKind, v):
    """Apply ``t`` to a scalar or array."""
    arr = np.asarray(v, dtype=float)
    if t.kind == "identity":
        out = arr
    elif t.kind == "log":
        if np.any(arr <= 0):
            raise TransformDomainError(f"log applied to non-positive value(s) {_first_bad(arr, arr <= 0)!r}")
        out = np.log(arr)
    else:
        if t.exponent is None:
            raise TransformDomainError("power template has no exponent")
        e = t.exponent
        if float(e).is_integer():
            if e < 0 and np.any(arr == 0):
                raise TransformDomainError(f"{t} applied to zero")
        elif np.any(arr <= 0):
            raise TransformDomainError(f"{t} applied to non-positive value(s) {_first_bad(arr, arr <= 0)!r}")
        out = np.power(arr, e)
    return out if out.ndim else float(out)


def _first_bad(arr, mask):
    return float(np.atleast_1d(arr)[np.atleast_1d(mask)][0])


def _feasible(t: TransformKind, v: np.ndarray) -> bool:
    try:
        out = apply_transform(t, v)
    except TransformDomainError:
        return False
    return bool(np.all(np.isfinite(out)))


def _fit_pair(x, y, gy, gx):
    if not (_feasible(gy, y) and _feasible(gx, x)):
        return None
    try:
        return linear_fit(apply_transform(gx, x), apply_transform(gy, y))
    except SingularSystemError:
        return None


def best_power_fit(xs, ys, gy: TransformKind, power_grid=None):
    """Best ``gy(y) = a * x**e + b`` over the exponent grid.

    Returns ``(TransformKind.power(e), LinearFit)`` or ``None`` if infeasible.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if np.any(x <= 0) or not _feasible(gy, y):
        return None
    ty = apply_transform(gy, y)

    def rss(e):
        try:
            return linear_fit(np.power(x, e), ty).rss
        except (SingularSystemError, ValueError):
            return math.inf

    e, best = grid_minimize(rss, power_grid)
    if not math.isfinite(best):
        return None
    return TransformKind.power(e), linear_fit(np.power(x, e), ty)


def select_transforms(xs, ys, dictionary: Iterable[TransformKind] = DEFAULT_DICTIONARY,
                      power_grid=None) -> TransformSelection:
    """Exhaustively fit every (gy, gx) pair and keep the one with least rss.

    A power template on the abscissa is expanded over ``power_grid`` (coarse,
    then refined around the coarse optimum). Response transforms must be fully
    specified; power templates are skipped there. Near-ties (relative rss within
    1e-12) go to the pair with fewer free parameters, then kind order.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    dictionary = list(dictionary)
    responses = [t for t in dictionary if not (t.kind == "power" and t.exponent is None)]
    candidates = {}
    results = []
    for gy in responses:
        for gx in dictionary:
            if gx.kind == "power" and gx.exponent is None:
                found = best_power_fit(x, y, gy, power_grid)
                if found is None:
                    continue
                gx_used, fit = found
            else:
                fit = _fit_pair(x, y, gy, gx)
                if fit is None:
                    continue
                gx_used = gx
            scale = float(np.sum((apply_transform(gy, y) - np.mean(apply_transform(gy, y))) ** 2))
            sel = TransformSelection(gy, gx_used, fit, fit.rss)
            candidates[(str(gy), gx.kind if gx.exponent is None else str(gx))] = sel
            results.append((sel, scale))
    if not results:
        raise NoFeasibleTransformError("no transform pair is feasible for the data")
    best_rss = min(s.loss for s, _ in results)
    tied = [
        s for s, scale in results
        if s.loss - best_rss <= TIE_RTOL * max(best_rss, TIE_RTOL * scale)
    ]
    winner = min(tied, key=lambda s: (s.gy.n_params + s.gx.n_params, s.gy.sort_key(), s.gx.sort_key()))
    return TransformSelection(winner.gy, winner.gx, winner.fit, winner.loss, candidates)


@dataclass(frozen=True)
class JointSelection:
    """Result of selecting transforms jointly for two arrays sharing an abscissa."""

    a: TransformSelection
    b: TransformSelection
    loss: float
    # summed rss for every (gy_a, gx_a, gy_b, gx_b) combination tried
    table: dict


def select_joint(xs, ys_a, ys_b, dictionary: Sequence[TransformKind] = DEFAULT_DICTIONARY,
                 power_grid=None) -> JointSelection:
    """Pick the transform quadruple minimizing rss_a + rss_b.

    The two projections share no parameters, so the joint minimum is attained by
    the per-array minima; the full table of summed objectives is kept for reporting.
    """
    sa = select_transforms(xs, ys_a, dictionary, power_grid)
    sb = select_transforms(xs, ys_b, dictionary, power_grid)
    table = {
        ka + kb: ca.loss + cb.loss
        for ka, ca in sa.candidates.items()
        for kb, cb in sb.candidates.items()
    }
    return JointSelection(sa, sb, sa.loss + sb.loss, table)
