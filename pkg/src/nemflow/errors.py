"""Exception types shared across the package."""


class NemflowError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(NemflowError):
    """Malformed or inconsistent configuration input."""

    def __init__(self, message, line=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        suffix = f" ({', '.join(loc)})" if loc else ""
        super().__init__(message + suffix)
        self.line = line
        self.field = field


class EllipticityError(NemflowError):
    """The frozen-coefficient linear operators are not strongly elliptic."""


class TemperaturePositivityError(NemflowError):
    """Absolute temperature reached the configured floor (or below zero)."""


class ConstitutiveInconsistencyError(NemflowError):
    """Two equivalent constitutive routes disagree beyond tolerance."""


class BlowUpError(NemflowError):
    """Non-finite values appeared during time integration."""


class PicardNonConvergenceError(NemflowError):
    """Picard iteration failed to contract within the allowed iterations."""
