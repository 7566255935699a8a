"""Age of Information for K-of-N multicast status updates with deadlines."""

from .analytic import analyze
from .config import (
    ExponentialDeadline,
    FixedDeadline,
    InfiniteDeadline,
    ServiceModel,
    SystemConfig,
)
from .errors import (
    AoiError,
    CapacityError,
    ConfigError,
    DivergenceError,
    ImpossibleEventError,
    PrecisionError,
    SimulationDivergenceError,
)
from .report import AoiReport

__version__ = "0.1.0"

__all__ = [
    "AoiError",
    "AoiReport",
    "CapacityError",
    "ConfigError",
    "DivergenceError",
    "ExponentialDeadline",
    "FixedDeadline",
    "ImpossibleEventError",
    "InfiniteDeadline",
    "PrecisionError",
    "ServiceModel",
    "SimulationDivergenceError",
    "SystemConfig",
    "analyze",
]
