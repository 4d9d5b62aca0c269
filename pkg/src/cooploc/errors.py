"""Exception types shared across the workbench."""


class DomainError(ValueError):
    """An argument is outside the physical or mathematical domain of an operation."""


class UsageError(ValueError):
    """An operation was invoked with an inconsistent or empty configuration."""


class ConfigError(ValueError):
    """A scenario config file could not be parsed or contains invalid values."""


class DegenerateGeometryError(ArithmeticError):
    """Anchor geometry does not carry enough information for 3D localization.

    Carries the determinant and condition number of the offending Fisher
    matrix when they are available.
    """

    def __init__(self, message, det=None, cond=None):
        super().__init__(message)
        self.det = det
        self.cond = cond
