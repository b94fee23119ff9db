"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class WarpFlowError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(WarpFlowError, ValueError):
    """Invalid configuration value, preset, or out-of-range input."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class ShapeError(WarpFlowError, ValueError):
    """Array length does not match the grid."""


class DegenerateMetricError(WarpFlowError, ValueError):
    """psi or phi lost positivity where the metric needs it."""


class UnsupportedDimensionError(WarpFlowError, ValueError):
    pass


class ContractError(WarpFlowError, ValueError):
    """A precondition of an operation was violated by the caller."""


class InsufficientDataError(WarpFlowError, ValueError):
    pass


class IngestionError(WarpFlowError, ValueError):
    """Malformed profile CSV. ``row`` is the 1-based data row, if known."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class BlowUpError(WarpFlowError, RuntimeError):
    """The explicit integration left the admissible set.

    Carries the offending node index, the time, and (when raised from
    :func:`warpflow.flow.evolve`) the partial trajectory.
    """

    def __init__(self, message: str, node: int | None = None, t: float | None = None):
        self.node = node
        self.t = t
        self.trajectory = None
        super().__init__(f"{message} (node={node}, t={t})")
