import math

import numpy as np
import pytest

from aoi_multicast import ConfigError, analyze
from aoi_multicast.optimizer import OptimizeSpec, deadline_for, optimize_deadline, sweep
from aoi_multicast.simulator import SimConfig

from conftest import make


def objective(template, spec, x):
    cfg = template.with_deadline(deadline_for(template, spec.policy_kind, x))
    return getattr(analyze(cfg), spec.objective)


def test_unicast_optimum_no_worse_than_no_deadline():
    spec = OptimizeSpec("average_aoi", "fixed", (0.01, 50.0))
    res = optimize_deadline(make(1, 1, 1.0), spec)
    assert res.best_value <= 2.0
    assert math.isfinite(res.best_deadline)
    brute = min(objective(make(1, 1, 1.0), spec, x) for x in np.linspace(0.01, 50, 2000))
    assert res.best_value <= brute + 1e-9


def test_slow_service_optimum_region(scenario):
    res = optimize_deadline(scenario(1 / 3), OptimizeSpec(bracket=(0.11, 50.0)))
    assert 0.5 <= res.best_deadline <= 1.5


@pytest.mark.parametrize("rate", [1 / 3, 1 / 2, 1.0])
def test_fixed_beats_random_at_optimum(scenario, rate):
    fixed = optimize_deadline(scenario(rate), OptimizeSpec(policy_kind="fixed", bracket=(0.11, 50.0)))
    rand = optimize_deadline(scenario(rate), OptimizeSpec(policy_kind="random-mean", bracket=(0.11, 50.0)))
    assert fixed.best_value <= rand.best_value


@pytest.mark.parametrize("rate", [1 / 3, 1 / 2, 1.0])
@pytest.mark.parametrize("kind", ["fixed", "random-mean"])
def test_peak_optimum_comes_first(scenario, rate, kind):
    avg = optimize_deadline(scenario(rate), OptimizeSpec("average_aoi", kind, (0.11, 50.0)))
    peak = optimize_deadline(scenario(rate), OptimizeSpec("average_peak_aoi", kind, (0.11, 50.0)))
    assert peak.best_deadline < avg.best_deadline


@pytest.mark.parametrize("objective_name", ["average_aoi", "average_peak_aoi"])
@pytest.mark.parametrize("kind", ["fixed", "random-mean"])
def test_optimality_certificate(scenario, objective_name, kind):
    spec = OptimizeSpec(objective_name, kind, (0.11, 20.0))
    template = scenario(0.5)
    res = optimize_deadline(template, spec)
    lo, hi = spec.bracket
    assert lo <= res.best_deadline <= hi
    assert res.best_value <= res.prescan_minimum[1]
    for x in (res.best_deadline - spec.tolerance, res.best_deadline + spec.tolerance):
        if lo <= x <= hi:
            assert objective(template, spec, x) >= res.best_value - 1e-9


def test_degenerate_bracket():
    res = optimize_deadline(make(10, 7, 0.5, 0.1), OptimizeSpec(bracket=(2.0, 2.0)))
    assert res.evaluations == 1 and res.best_deadline == 2.0


def test_bracket_must_clear_shift():
    with pytest.raises(ConfigError):
        optimize_deadline(make(10, 7, 0.5, 0.1), OptimizeSpec(bracket=(0.1, 3.0)))
    with pytest.raises(ConfigError):
        OptimizeSpec(bracket=(3.0, 1.0))
    with pytest.raises(ConfigError):
        OptimizeSpec(objective="median")


def test_threshold_sweep_turning_point():
    rows = sweep(make(10, 1, 0.5, 0.1, "fixed", 3.0), "threshold_k", range(1, 11))
    values = [r.report.average_aoi for r in rows]
    assert abs((1 + int(np.argmin(values))) - 3) <= 1


def test_deadline_sweep_with_infinite_sentinel(scenario):
    rows = sweep(scenario(0.5, "fixed", 1.0), "deadline", [0.5, 1.0, 3.0, "inf"])
    assert [r.value for r in rows] == [0.5, 1.0, 3.0, "inf"]
    assert rows[-1].config.policy == "none"
    assert rows[-1].report.average_aoi == analyze(scenario(0.5)).average_aoi


def test_sweep_rows_marks_invalid_values():
    rows = sweep(make(5, 3, 0.5, 0.1, "fixed", 2.0), "threshold_k", [2, 9, 2.5, 3])
    assert [r.error is None for r in rows] == [True, False, False, True]
    rows = sweep(make(5, 3, 0.5, 0.1, "fixed", 2.0), "deadline", [0.05, 1.0])
    assert rows[0].error and "DivergenceError" in rows[0].error and rows[1].error is None


def test_sweep_engines_and_order_are_deterministic():
    template = make(5, 2, 1.0, 0.0, "exp", 2.0)
    sim = SimConfig(num_updates=5000, seed=8)
    serial = sweep(template, "num_devices_n", [2, 4, 6], ("analytic", "simulation"), sim=sim)
    parallel = sweep(template, "num_devices_n", [2, 4, 6], ("analytic", "simulation"), sim=sim, workers=4)
    assert [(r.value, r.engine) for r in serial] == [
        (2, "analytic"), (2, "simulation"), (4, "analytic"), (4, "simulation"),
        (6, "analytic"), (6, "simulation")]
    assert serial == parallel


def test_sweep_rejects_unknown_axis():
    with pytest.raises(ConfigError):
        sweep(make(2, 1, 1.0), "service_rate", [1.0])
