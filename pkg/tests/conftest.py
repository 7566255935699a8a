import math

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from aoi_multicast import (
    ExponentialDeadline,
    FixedDeadline,
    InfiniteDeadline,
    ServiceModel,
    SystemConfig,
)

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: s.split(":")[0]):
            terminalreporter.write_line(line)


def make(n, k, rate, shift=0.0, deadline="none", value=None):
    service = ServiceModel(rate, shift)
    if deadline == "fixed":
        d = FixedDeadline(value)
    elif deadline == "exp":
        d = ExponentialDeadline.from_mean(value, shift)
    else:
        d = InfiniteDeadline()
    return SystemConfig(n, k, service, d)


def grid_configs(include_infinite=True):
    """The standard cross-validation grid."""
    out = []
    for n in (1, 2, 5, 10):
        for k in sorted({1, math.ceil(n / 2), n}):
            for rate in (1 / 3, 1 / 2, 1.0):
                for c in (0.0, 0.1):
                    if include_infinite:
                        out.append(make(n, k, rate, c))
                    for td in (c + 0.1, 1.0, 3.0, 10.0):
                        out.append(make(n, k, rate, c, "fixed", td))
                    for mean in (1.0, 3.0, 10.0):
                        out.append(make(n, k, rate, c, "exp", mean))
    return out


@st.composite
def configs(draw, max_devices=8, policies=("none", "fixed", "exp")):
    n = draw(st.integers(1, max_devices))
    k = draw(st.integers(1, n))
    rate = draw(st.floats(0.2, 3.0))
    shift = draw(st.sampled_from([0.0, 0.05, 0.1, 0.5]))
    policy = draw(st.sampled_from(policies))
    span = draw(st.floats(0.05, 10.0))
    return make(n, k, rate, shift, policy, shift + span)


@pytest.fixture
def scenario():
    """The deadline-sweep scenario: N = 10, K = 7, c = 0.1."""
    def build(rate, deadline="none", value=None):
        return make(10, 7, rate, 0.1, deadline, value)
    return build
