"""Exception types raised across the package."""


class LoschmidtError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(LoschmidtError, ValueError):
    pass


class RepresentationError(LoschmidtError, ValueError):
    pass


class DimensionMismatchError(LoschmidtError, ValueError):
    pass


class DomainError(LoschmidtError, ValueError):
    pass


class WindowError(LoschmidtError, ValueError):
    """Fit or comparison window is empty, too short or contains invalid data."""


class InterpolationError(LoschmidtError, ValueError):
    pass


class AliasingError(LoschmidtError, ValueError):
    """Histogram bins too coarse to resolve the phase exp(i dS / hbar)."""


class SizeLimitError(LoschmidtError, ValueError):
    pass


class ConfigError(LoschmidtError, ValueError):
    """Invalid experiment configuration. ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class MissingInputError(LoschmidtError, FileNotFoundError):
    pass
