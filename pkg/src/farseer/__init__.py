"""Fitting and analysis of neural scaling laws.

The Farseer family ``L = exp(a3 n^gamma + b3) + exp(a2 n^beta + b2) * d^(-exp(a1 n^alpha + b1))``
is fitted by differential piecewise fitting; the Chinchilla family
``L = A / n^alpha + B / d^beta + E`` by multi-start nonlinear least squares.
"""

from ._version import __version__
from .analysis import (
    AllocationPoint,
    EvalReport,
    MonotonicityReport,
    PerspectiveSummary,
    SurfaceDelta,
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
from .core import (
    REFERENCE_FARSEER,
    ChinchillaParams,
    FarseerParams,
    LossGrid,
    LossPoint,
    eval_chinchilla,
    eval_farseer,
    evaluate,
    family_of,
    farseer_components,
)
from .errors import (
    EvaluationError,
    FarseerError,
    FitFailedError,
    GridError,
    InsufficientDataError,
    NoFeasibleTransformError,
    ParseError,
    ResidualSignError,
    SingularSystemError,
    TransformDomainError,
)
from .io import LawFile, bpc_from_loss, load_grid, load_law, parse_grid, save_grid, save_law
from .nonlinear import MultiStartConfig, NonlinearFitResult, fit_chinchilla_nonlinear, fit_farseer_nonlinear
from .piecewise import (
    DiffSeries,
    FitReport,
    FitWarning,
    RefinementTrace,
    ResidualDiagnostics,
    StageOneResult,
    build_diff_series,
    fit_chinchilla_piecewise,
    fit_farseer,
    stage1_fit,
    stage2_parameterize,
    stage3_fit_residual,
)
from .regression import LinearFit, TransformKind, TransformSelection, apply_transform, linear_fit, select_transforms
from .synth import SurfaceSpec, generate_surface

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
