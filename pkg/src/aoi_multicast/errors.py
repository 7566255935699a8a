"""Exception hierarchy shared by the engines and the CLI."""


class AoiError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(AoiError, ValueError):
    """A scenario or option violates its documented constraints."""


class CapacityError(ConfigError):
    """The scenario exceeds the documented numerical-conditioning limit."""


class DivergenceError(AoiError):
    """The tracked device can never receive an update, so the AoI is infinite."""


class ImpossibleEventError(AoiError):
    """A conditional quantity was requested on a zero-probability event."""


class PrecisionError(AoiError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SimulationDivergenceError(DivergenceError):
    """A simulated trajectory produced too few receptions to estimate anything."""
