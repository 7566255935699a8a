"""Deadline optimization and parameter sweeps over the analytic (and simulated) engines."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytic import analyze
from .config import ExponentialDeadline, FixedDeadline, InfiniteDeadline, SystemConfig
from .errors import AoiError, ConfigError, DivergenceError

OBJECTIVES = ("average_aoi", "average_peak_aoi")
POLICY_KINDS = ("fixed", "random-mean")


@dataclass(frozen=True)
class OptimizeSpec:
    objective: str = "average_aoi"
    policy_kind: str = "fixed"
    bracket: tuple = (0.01, 50.0)
    tolerance: float = 1e-4
    grid_prescan_points: int = 64

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.policy_kind not in POLICY_KINDS:
            raise ConfigError(f"policy_kind must be one of {POLICY_KINDS}, got {self.policy_kind!r}")
        lo, hi = self.bracket
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise ConfigError(f"bracket must be finite with low <= high, got {self.bracket!r}")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        if self.grid_prescan_points < 3:
            raise ConfigError("grid_prescan_points must be >= 3")


@dataclass(frozen=True)
class OptimizeResult:
    best_deadline: float
    best_value: float
    evaluations: int
    prescan_minimum: tuple

    def to_dict(self):
        return {
            "best_deadline": self.best_deadline,
            "best_value": self.best_value,
            "evaluations": self.evaluations,
            "prescan_minimum": list(self.prescan_minimum),
        }


def deadline_for(config, policy_kind, value):
    """Deadline policy at ``value``: a fixed horizon or a random-deadline mean."""
    if policy_kind == "fixed":
        return FixedDeadline(value)
    return ExponentialDeadline.from_mean(value, config.service.shift)


class _Objective:
    def __init__(self, template, spec):
        self.template = template
        self.spec = spec
        self.evaluations = 0

    def __call__(self, x):
        self.evaluations += 1
        try:
            cfg = self.template.with_deadline(deadline_for(self.template, self.spec.policy_kind, x))
            return getattr(analyze(cfg), self.spec.objective)
        except DivergenceError as exc:
            raise DivergenceError(f"objective diverges at deadline {x!r}: {exc}") from exc


def optimize_deadline(config_template: SystemConfig, spec: OptimizeSpec) -> OptimizeResult:
    """Grid prescan, then ternary search on the two cells around the best grid point."""
    lo, hi = spec.bracket
    shift = config_template.service.shift
    if not lo > shift:
        raise ConfigError(f"bracket low {lo!r} must exceed the service shift {shift!r}")
    f = _Objective(config_template, spec)
    if lo == hi:
        v = f(lo)
        return OptimizeResult(lo, v, f.evaluations, (lo, v))

    grid = np.linspace(lo, hi, spec.grid_prescan_points)
    values = [f(float(x)) for x in grid]
    i = int(np.argmin(values))
    prescan = (float(grid[i]), values[i])
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, len(grid) - 1)])
    while b - a > spec.tolerance:
        m1 = a + (b - a) / 3
        m2 = b - (b - a) / 3
        if f(m1) <= f(m2):
            b = m2
        else:
            a = m1
    mid = (a + b) / 2
    v = f(mid)
    if v <= prescan[1]:
        return OptimizeResult(mid, v, f.evaluations, prescan)
    return OptimizeResult(prescan[0], prescan[1], f.evaluations, prescan)


# ---- sweeps ----------------------------------------------------------------

AXES = ("deadline", "threshold_k", "num_devices_n")
ENGINES = ("analytic", "simulation")
INFINITE = "inf"


@dataclass(frozen=True)
class SweepRow:
    value: object
    engine: str
    config: SystemConfig | None
    report: object = None
    error: str | None = None


def _config_at(template, axis, value, policy_kind):
    if axis == "deadline":
        if value == INFINITE or (isinstance(value, float) and math.isinf(value)):
            return template.with_deadline(InfiniteDeadline())
        return template.with_deadline(deadline_for(template, policy_kind, float(value)))
    count = float(value)
    if count != int(count):
        raise ConfigError(f"{axis} must be an integer, got {value!r}")
    if axis == "threshold_k":
        return template.with_counts(threshold=int(count))
    return template.with_counts(num_devices=int(count))


def _policy_kind(template):
    return "random-mean" if isinstance(template.deadline, ExponentialDeadline) else "fixed"


def _evaluate(template, axis, value, engine, sim, policy_kind):
    try:
        cfg = _config_at(template, axis, value, policy_kind)
    except (AoiError, ValueError, TypeError) as exc:
        return SweepRow(value, engine, None, error=f"{type(exc).__name__}: {exc}")
    try:
        if engine == "analytic":
            rep = analyze(cfg)
        else:
            from .simulator import SimConfig, simulate

            rep = simulate(cfg, sim or SimConfig())
    except (AoiError, ValueError) as exc:
        return SweepRow(value, engine, cfg, error=f"{type(exc).__name__}: {exc}")
    return SweepRow(value, engine, cfg, rep)


def sweep(config_template: SystemConfig, axis: str, values, engines=("analytic",), sim=None,
          workers=None, policy_kind=None):
    """One row per (value, engine), in ``values`` order then ``engines`` order.

    For the deadline axis the policy of the template decides whether values are
    fixed horizons or random-deadline means (override with ``policy_kind``);
    the string ``"inf"`` stands for no deadline.  Invalid values produce a row
    with ``error`` set and the sweep continues.
    """
    if axis not in AXES:
        raise ConfigError(f"axis must be one of {AXES}, got {axis!r}")
    for e in engines:
        if e not in ENGINES:
            raise ConfigError(f"unknown engine {e!r}")
    kind = policy_kind or _policy_kind(config_template)
    jobs = [(v, e) for v in values for e in engines]

    def run(job):
        return _evaluate(config_template, axis, job[0], job[1], sim, kind)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]


__all__ = [
    "AXES",
    "ENGINES",
    "INFINITE",
    "OBJECTIVES",
    "OptimizeResult",
    "OptimizeSpec",
    "SweepRow",
    "deadline_for",
    "optimize_deadline",
    "sweep",
]
