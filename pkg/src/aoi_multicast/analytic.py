"""Policy dispatch for the closed-form engines."""

from .analytic_fixed import PRINTED_DEFECTS as FIXED_DEFECTS, average_aoi_fixed
from .analytic_random import PRINTED_DEFECTS as RANDOM_DEFECTS, average_aoi_random
from .config import ExponentialDeadline

PRINTED_DEFECTS = FIXED_DEFECTS | RANDOM_DEFECTS


def analyze(config, printed=frozenset()):
    """Closed-form :class:`AoiReport` for any deadline policy."""
    if isinstance(config.deadline, ExponentialDeadline):
        return average_aoi_random(config, printed)
    return average_aoi_fixed(config, printed)
