"""Exception types shared across the toolkit."""


class MpccError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MpccError):
    """Malformed or inconsistent scenario configuration."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SpecError(MpccError):
    """Invalid nonlinearity parameters (rejected at construction)."""


class DivergenceError(MpccError):
    """A rescaled limit grows without bound (distinct from non-convergence)."""


class OverflowGuardError(MpccError):
    """An intermediate dilation scale exceeded representable magnitude."""


class MountainGeometryError(MpccError):
    """No mountain geometry: paths to negative energy do not exist
    (supremum of the density is nonpositive) or cannot be reached
    within the scale budget."""


class SolverError(MpccError):
    """A solver failed to converge or stalled."""


class ScheduleResolutionError(MpccError):
    """A planted dilation/translation schedule exceeds what the grid resolves."""
