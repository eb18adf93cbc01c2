"""Exception hierarchy shared across the package."""


class RepscaleError(Exception):
    """Base class for all package errors."""


class EvaluationError(RepscaleError):
    """A scaling-law evaluation produced a non-finite or non-positive value."""


class FitError(RepscaleError):
    """Base class for fitting failures."""


class InsufficientDataError(FitError):
    """Fewer records than free parameters allow a meaningful fit."""


class NoConvergedStartError(FitError):
    """Every optimizer start failed."""


class IdentifiabilityError(FitError):
    """The requested parameters cannot be determined from the given data."""


class InsufficientResidualsError(RepscaleError):
    """Not enough positive residual points for a log-space power-law fit."""


class BootstrapError(RepscaleError):
    """Too many bootstrap resamples failed to fit."""


class AllocationError(RepscaleError):
    """No feasible allocation under the requested constraints."""


class DataError(RepscaleError):
    """Malformed input file or row."""
