"""Scenario description: service model, deadline policy and the K-of-N setup."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

from .errors import CapacityError, ConfigError, DivergenceError

MAX_DEVICES = 30


def _positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class ServiceModel:
    """Per-device service time ``shift + Exp(rate)``."""

    rate: float
    shift: float = 0.0

    def __post_init__(self):
        _positive("service rate", self.rate)
        if not (math.isfinite(self.shift) and self.shift >= 0):
            raise ConfigError(f"service shift must be >= 0, got {self.shift!r}")

    @property
    def mean(self):
        return self.shift + 1.0 / self.rate


@dataclass(frozen=True)
class InfiniteDeadline:
    """No deadline: an update is only ever terminated by the K-th reception."""

    kind = "none"

    def describe(self):
        return "none"


@dataclass(frozen=True)
class FixedDeadline:
    """Every update is dropped ``horizon`` time units after generation."""

    horizon: float
    kind = "fixed"

    def __post_init__(self):
        _positive("deadline horizon", self.horizon)

    def describe(self):
        return f"fixed:{self.horizon!r}"


@dataclass(frozen=True)
class ExponentialDeadline:
    """Per-update deadline ``shift + Exp(rate)``; the shift must equal the service shift.

    Leave ``shift`` as None to inherit it from the service model.
    """

    rate: float
    shift: float | None = None
    kind = "exp"

    def __post_init__(self):
        _positive("deadline rate", self.rate)
        if self.shift is not None and not (math.isfinite(self.shift) and self.shift >= 0):
            raise ConfigError(f"deadline shift must be >= 0, got {self.shift!r}")

    @classmethod
    def from_mean(cls, mean, shift):
        """Deadline whose mean ``1/rate + shift`` equals ``mean``."""
        if not mean > shift:
            raise DivergenceError(
                f"mean deadline {mean!r} must exceed the service shift {shift!r}"
            )
        return cls(rate=1.0 / (mean - shift), shift=shift)

    def mean(self, shift):
        return (self.shift if self.shift is not None else shift) + 1.0 / self.rate

    def describe(self):
        return f"exp(rate={self.rate!r})"


DeadlinePolicy = Union[InfiniteDeadline, FixedDeadline, ExponentialDeadline]


@dataclass(frozen=True)
class SystemConfig:
    """One scenario: ``num_devices`` receivers, termination after ``threshold`` receptions."""

    num_devices: int
    threshold: int
    service: ServiceModel
    deadline: DeadlinePolicy = InfiniteDeadline()

    def __post_init__(self):
        n, k = self.num_devices, self.threshold
        if not (isinstance(n, int) and isinstance(k, int)):
            raise ConfigError("num_devices and threshold must be integers")
        if n < 1 or not 1 <= k <= n:
            raise ConfigError(f"need 1 <= K <= N, got N={n}, K={k}")
        if n > MAX_DEVICES:
            raise CapacityError(f"N={n} exceeds the supported maximum of {MAX_DEVICES}")
        if not isinstance(self.service, ServiceModel):
            raise ConfigError("service must be a ServiceModel")
        d = self.deadline
        if isinstance(d, FixedDeadline):
            if d.horizon <= self.service.shift:
                raise DivergenceError(
                    f"deadline {d.horizon!r} <= service shift {self.service.shift!r}: "
                    "no update can ever be delivered"
                )
        elif isinstance(d, ExponentialDeadline):
            if d.shift is not None and d.shift != self.service.shift:
                raise ConfigError(
                    "the random deadline shift must equal the service shift "
                    f"({d.shift!r} != {self.service.shift!r})"
                )
            if d.shift is None:
                object.__setattr__(self, "deadline", replace(d, shift=self.service.shift))
        elif not isinstance(d, InfiniteDeadline):
            raise ConfigError(f"unknown deadline policy {d!r}")

    @property
    def policy(self):
        return self.deadline.kind

    def with_deadline(self, deadline):
        return replace(self, deadline=deadline)

    def with_counts(self, num_devices=None, threshold=None):
        return replace(
            self,
            num_devices=self.num_devices if num_devices is None else num_devices,
            threshold=self.threshold if threshold is None else threshold,
        )

    def deadline_param(self):
        """Fixed horizon, random-deadline mean, or ``inf`` for no deadline."""
        d = self.deadline
        if isinstance(d, FixedDeadline):
            return d.horizon
        if isinstance(d, ExponentialDeadline):
            return d.mean(self.service.shift)
        return math.inf

    def to_dict(self):
        d = self.deadline
        out = {
            "num_devices": self.num_devices,
            "threshold": self.threshold,
            "service_rate": self.service.rate,
            "service_shift": self.service.shift,
            "policy": d.kind,
        }
        if isinstance(d, FixedDeadline):
            out["deadline_horizon"] = d.horizon
        elif isinstance(d, ExponentialDeadline):
            out["deadline_rate"] = d.rate
        return out

    @classmethod
    def from_dict(cls, data):
        service = ServiceModel(data["service_rate"], data["service_shift"])
        policy = data["policy"]
        if policy == "fixed":
            deadline = FixedDeadline(data["deadline_horizon"])
        elif policy == "exp":
            deadline = ExponentialDeadline(data["deadline_rate"], service.shift)
        elif policy == "none":
            deadline = InfiniteDeadline()
        else:
            raise ConfigError(f"unknown policy {policy!r}")
        return cls(data["num_devices"], data["threshold"], service, deadline)
