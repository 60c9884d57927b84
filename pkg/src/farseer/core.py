"""Measurement and parameter types, and evaluation of both law families.

Model size ``n`` is the non-embedding parameter count and ``d`` the number of
training tokens; both are treated as opaque positive counts. Losses are BPC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import EvaluationError, GridError

EXP_ARG_LIMIT = 700.0
DEFAULT_LAMBDA = math.sqrt(2.0)


@dataclass(frozen=True)
class LossPoint:
    n: float
    d: float
    loss: float

    def __post_init__(self):
        for name in ("n", "d", "loss"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise GridError(f"{name} must be finite and positive, got {value!r}")


@dataclass(frozen=True)
class LossGrid:
    """An empirical loss surface: (n, d, loss) observations.

    Points are stored sorted by (n, d). ``lam`` is the geometric ratio of the
    sampling ladder, used when pairing ``d`` with ``lam * d``.
    """

    points: tuple[LossPoint, ...]
    lam: float = DEFAULT_LAMBDA

    def __init__(self, points: Iterable[LossPoint], lam: float = DEFAULT_LAMBDA):
        pts = tuple(sorted(points, key=lambda p: (p.n, p.d)))
        if not (math.isfinite(lam) and lam > 1):
            raise GridError(f"grid ratio must exceed 1, got {lam!r}")
        seen = set()
        for p in pts:
            if (p.n, p.d) in seen:
                raise GridError(f"duplicate (n, d) pair ({p.n!r}, {p.d!r})")
            seen.add((p.n, p.d))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "lam", float(lam))

    @classmethod
    def from_arrays(cls, n, d, loss, lam: float = DEFAULT_LAMBDA) -> LossGrid:
        n, d, loss = (np.asarray(a, dtype=float).ravel() for a in (n, d, loss))
        if not (n.shape == d.shape == loss.shape):
            raise GridError("n, d and loss must have the same length")
        return cls((LossPoint(float(a), float(b), float(c)) for a, b, c in zip(n, d, loss)), lam)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[LossPoint]:
        return iter(self.points)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(n, d, loss)`` as float arrays in storage order."""
        if not self.points:
            empty = np.empty(0)
            return empty, empty.copy(), empty.copy()
        arr = np.array([(p.n, p.d, p.loss) for p in self.points], dtype=float)
        return arr[:, 0], arr[:, 1], arr[:, 2]

    @property
    def model_sizes(self) -> list[float]:
        return sorted({p.n for p in self.points})

    def by_model_size(self) -> dict[float, tuple[np.ndarray, np.ndarray]]:
        """Map each model size to its ``(d, loss)`` arrays sorted by ``d``."""
        groups: dict[float, list[LossPoint]] = {}
        for p in self.points:
            groups.setdefault(p.n, []).append(p)
        return {
            n: (np.array([p.d for p in pts]), np.array([p.loss for p in pts]))
            for n, pts in groups.items()
        }

    def filter(self, predicate) -> LossGrid:
        return LossGrid((p for p in self.points if predicate(p)), self.lam)


@dataclass(frozen=True)
class FarseerParams:
    """Coefficients of L = exp(a3 n^gamma + b3) + exp(a2 n^beta + b2) * d^(-exp(a1 n^alpha + b1))."""

    a1: float
    b1: float
    alpha: float
    a2: float
    b2: float
    beta: float
    a3: float
    b3: float
    gamma: float

    NAMES = ("a1", "b1", "alpha", "a2", "b2", "beta", "a3", "b3", "gamma")

    def __post_init__(self):
        for name in self.NAMES:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in self.NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> FarseerParams:
        return cls(*(float(v) for v in values))

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.NAMES}

    def exponent_of(self, n):
        """A(n), the data exponent."""
        return _stretched_exp(self.a1, self.alpha, self.b1, n, "exponent term A(N)")

    def coefficient_of(self, n):
        """B(n), the data-term coefficient."""
        return _stretched_exp(self.a2, self.beta, self.b2, n, "coefficient term B(N)")

    def residual_of(self, n):
        """exp(a3 n^gamma + b3), the model-dependent residual E + U(n)."""
        return _stretched_exp(self.a3, self.gamma, self.b3, n, "residual term U(N)")


@dataclass(frozen=True)
class ChinchillaParams:
    """Coefficients of L = A / n^alpha + B / d^beta + E."""

    A: float
    alpha: float
    B: float
    beta: float
    E: float

    NAMES = ("A", "alpha", "B", "beta", "E")

    def __post_init__(self):
        for name in self.NAMES:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in self.NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> ChinchillaParams:
        return cls(*(float(v) for v in values))

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.NAMES}


# The published fit on the baseline data recipe.
REFERENCE_FARSEER = FarseerParams(
    a1=-0.124, b1=0.424, alpha=0.123,
    a2=88.01, b2=-6.287, beta=-0.1,
    a3=-0.021, b3=-0.091, gamma=0.169,
)


def _checked_exp(arg, term: str):
    arg = np.asarray(arg, dtype=float)
    if not np.all(np.isfinite(arg)):
        raise EvaluationError(f"non-finite argument in {term}")
    if np.any(np.abs(arg) > EXP_ARG_LIMIT):
        raise EvaluationError(
            f"argument of exp in {term} exceeds +/-{EXP_ARG_LIMIT:g} (max |arg| = {np.max(np.abs(arg)):.6g})"
        )
    return np.exp(arg)


def _stretched_exp(a, p, b, n, term):
    n = np.asarray(n, dtype=float)
    out = _checked_exp(a * np.power(n, p) + b, term)
    return out if out.ndim else float(out)


def _check_positive(**values):
    for name, v in values.items():
        v = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise EvaluationError(f"{name} must be finite and positive")


def farseer_components(p: FarseerParams, n):
    """Return ``(A(n), B(n), U(n))`` for scalar or array ``n``."""
    _check_positive(n=n)
    return p.exponent_of(n), p.coefficient_of(n), p.residual_of(n)


def eval_farseer(p: FarseerParams, n, d):
    """Evaluate the Farseer law; broadcasts over ``n`` and ``d``."""
    _check_positive(n=n, d=d)
    a, b, u = farseer_components(p, n)
    log_power = -np.asarray(a) * np.log(np.asarray(d, dtype=float))
    _checked_exp(log_power, "data power d^(-A(N))")
    out = u + b * np.power(d, -np.asarray(a))
    if not np.all(np.isfinite(out)):
        raise EvaluationError("non-finite loss")
    return out if np.ndim(out) else float(out)


def eval_chinchilla(p: ChinchillaParams, n, d):
    """Evaluate A / n^alpha + B / d^beta + E; broadcasts over ``n`` and ``d``."""
    _check_positive(n=n, d=d)
    n = np.asarray(n, dtype=float)
    d = np.asarray(d, dtype=float)
    out = p.A / np.power(n, p.alpha) + p.B / np.power(d, p.beta) + p.E
    if not np.all(np.isfinite(out)):
        raise EvaluationError("non-finite loss")
    return out if np.ndim(out) else float(out)


def evaluate(law, n, d):
    """Evaluate either law family."""
    if isinstance(law, FarseerParams):
        return eval_farseer(law, n, d)
    if isinstance(law, ChinchillaParams):
        return eval_chinchilla(law, n, d)
    raise TypeError(f"unsupported law type {type(law).__name__}")


def family_of(law) -> str:
    if isinstance(law, FarseerParams):
        return "farseer"
    if isinstance(law, ChinchillaParams):
        return "chinchilla"
    raise TypeError(f"unsupported law type {type(law).__name__}")
