"""Exception hierarchy shared by every module of the package."""


class FarseerError(Exception):
    """Base class for all errors raised by this package."""


class EvaluationError(FarseerError):
    """A law evaluation produced a non-finite or out-of-range intermediate."""


class GridError(FarseerError, ValueError):
    """A loss grid violates one of its invariants."""


class SingularSystemError(FarseerError):
    """A regression had zero variance in its abscissa."""


class TransformDomainError(FarseerError, ValueError):
    """A transform was applied outside its domain."""


class NoFeasibleTransformError(FarseerError):
    """Every candidate transform pair was infeasible on the data."""


class InsufficientDataError(FarseerError):
    """Not enough usable points remain for a fitting stage."""


class ResidualSignError(FarseerError):
    """The averaged model-dependent residual was non-positive for some model size."""


class FitFailedError(FarseerError):
    """Every start of a multi-start fit diverged."""


class ParseError(FarseerError, ValueError):
    """A grid or law file could not be parsed."""
