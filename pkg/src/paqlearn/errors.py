"""Exception types shared across the package."""


class PaqLearnError(Exception):
    """Base class for all package-specific errors."""


class NonFinite(PaqLearnError):
    """A matrix or vector contains NaN or Inf entries."""


class DimMismatch(PaqLearnError):
    """Operands have incompatible dimensions."""


class InvalidRank(PaqLearnError):
    """Requested rank is outside 1 <= r <= d."""


class NotPositiveSemidefinite(PaqLearnError):
    """A matrix required to be PSD has a significantly negative eigenvalue."""


class DegenerateDirection(PaqLearnError):
    """Query direction lies (numerically) in the null space of the metric,
    so the slider response diverges."""


class BudgetTooSmall(PaqLearnError):
    """Measurement budget N is too small for the requested averaging m."""


class PreconditionViolated(PaqLearnError):
    """A policy formula produced a value violating its validity condition."""


class ZeroResponse(PaqLearnError):
    """A slider response of exactly zero cannot be inverted."""


class ZeroMatrix(PaqLearnError):
    """The zero matrix cannot be normalized to unit Frobenius norm."""


class NoProgress(PaqLearnError):
    """Backtracking line search underflowed the step size."""


class InvalidDim(PaqLearnError):
    """Dimension too small for the requested inverse moment to be estimated."""


class PropertyViolated(PaqLearnError):
    """A pipeline output violates one of the truncation properties."""


class ConfigError(PaqLearnError):
    """Experiment configuration is malformed or inconsistent."""
