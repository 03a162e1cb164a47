"""Exception types shared across the package."""


class ForchflowError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ForchflowError):
    """Invalid or unreadable configuration (CLI exit code 2)."""


class NumericError(ForchflowError):
    """An iterative numeric procedure failed to converge.

    Carries the final residual so callers can report how close the
    procedure got before giving up.
    """

    def __init__(self, message, residual=None):
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class StepError(NumericError):
    """A time step could not be completed; retry with a smaller dt."""
