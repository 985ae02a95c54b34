"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration (bad constants, malformed config file, bad grid sizes)."""


class ShapeError(ValueError):
    """Array length does not match the grid or field layout."""


class NumericalError(RuntimeError):
    """A linear solve failed or produced non-finite values."""


class BlowUpError(NumericalError):
    """Time integration produced NaN/Inf; carries the time stamp."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"solution blew up at t={t:g}")
