"""Monte-Carlo reproduction of the multicast protocol, one update at a time.

Every update draws one row of ``N + 1`` standard exponentials: the N service
times and one deadline draw (drawn even when the policy ignores it, so the
stream layout never depends on the policy).  Termination happens at the K-th
reception or the deadline, whichever is first, and the next update is
generated at that instant.

Initial condition: at time 0 the tracked device holds an update whose age is
its own first service-time draw.  The averaging window runs from 0 to the
termination of the last update the device received, so it is made of whole
renewal cycles and the first cycle simply starts from that initial age.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .config import ExponentialDeadline, FixedDeadline, SystemConfig
from .errors import ConfigError, SimulationDivergenceError

# sawtooth integral vs renewal accounting on the same trajectory
CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True)
class SimConfig:
    num_updates: int = 100_000
    seed: int = 0
    tracked_device: int = 1
    num_batches: int = 20
    replications: int = 1

    def __post_init__(self):
        for name in ("num_updates", "seed", "tracked_device", "num_batches", "replications"):
            if not isinstance(getattr(self, name), int):
                raise ConfigError(f"{name} must be an integer")
        if self.num_updates < 1 or self.replications < 1:
            raise ConfigError("num_updates and replications must be >= 1")
        if self.num_batches < 2:
            raise ConfigError("num_batches must be >= 2")
        if self.num_updates < self.num_batches:
            raise ConfigError("num_updates must be >= num_batches")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.tracked_device < 1:
            raise ConfigError("tracked_device is 1-based")

    def to_dict(self):
        return {
            "num_updates": self.num_updates,
            "seed": self.seed,
            "tracked_device": self.tracked_device,
            "num_batches": self.num_batches,
            "replications": self.replications,
        }


@dataclass(frozen=True)
class RenewalSample:
    """One renewal cycle, closed by a reception at the tracked device."""

    num_intervals: int
    wait: float
    success_intergen: float
    service: float
    area: float
    span: float
    peak: float


@dataclass(frozen=True)
class SimResult:
    average_aoi: float
    average_peak_aoi: float
    ci_halfwidth_aoi: float
    ci_halfwidth_peak: float
    success_fraction: float
    ci_halfwidth_success: float
    cycles: int
    receptions: int
    updates: int
    mean_wait: float
    mean_intervals: float
    mean_success_intergen: float
    mean_service: float
    config: SystemConfig
    sim: SimConfig

    @property
    def t_critical(self):
        return _t_crit(self.sim.num_batches * self.sim.replications)

    # standard errors behind the 95% halfwidths
    @property
    def se_aoi(self):
        return self.ci_halfwidth_aoi / self.t_critical

    @property
    def se_peak(self):
        return self.ci_halfwidth_peak / self.t_critical

    @property
    def se_success(self):
        return self.ci_halfwidth_success / self.t_critical

    def flat(self):
        return {
            "average_aoi": self.average_aoi,
            "average_peak_aoi": self.average_peak_aoi,
            "ci_halfwidth_aoi": self.ci_halfwidth_aoi,
            "ci_halfwidth_peak": self.ci_halfwidth_peak,
            "success_fraction": self.success_fraction,
            "ci_halfwidth_success": self.ci_halfwidth_success,
            "cycles": self.cycles,
            "receptions": self.receptions,
            "updates": self.updates,
            "mean_wait": self.mean_wait,
            "mean_intervals": self.mean_intervals,
            "mean_success_intergen": self.mean_success_intergen,
            "mean_service": self.mean_service,
        }

    def to_dict(self):
        out = self.flat()
        out["config"] = self.config.to_dict()
        out["sim"] = self.sim.to_dict()
        return out


def _t_crit(num_batches):
    return float(stats.t.ppf(0.975, num_batches - 1))


def _equal_batches(values, num_batches):
    values = np.asarray(values, dtype=float)
    if values.ndim != 1:
        raise ConfigError("expected a one-dimensional sequence")
    if num_batches < 2 or len(values) < num_batches:
        raise ConfigError(
            f"batch means need at least num_batches >= 2 values, got {len(values)} for {num_batches}"
        )
    size = len(values) // num_batches
    # the remainder that does not fill a whole batch is dropped from the end
    return values[: size * num_batches].reshape(num_batches, size)


def batch_confidence(values, num_batches):
    """(mean, 95% halfwidth) from non-overlapping equal batch means."""
    batches = _equal_batches(values, num_batches).mean(axis=1)
    return float(batches.mean()), _halfwidth(batches)


def _halfwidth(batch_values):
    b = len(batch_values)
    spread = float(np.std(batch_values, ddof=1))
    return _t_crit(b) * spread / math.sqrt(b)


def _stream(seed, replication):
    seq = np.random.SeedSequence(seed, spawn_key=(replication,))
    return np.random.Generator(np.random.Philox(seq))


@dataclass
class _Trajectory:
    """Vectorized record of one replication."""

    services: np.ndarray
    deadlines: np.ndarray
    terminations: np.ndarray
    generations: np.ndarray
    received: np.ndarray
    initial_age: float


def _run(config, sim, replication):
    n, k = config.num_devices, config.threshold
    rate, shift = config.service.rate, config.service.shift
    if sim.tracked_device > n:
        raise ConfigError(f"tracked_device {sim.tracked_device} exceeds N={n}")
    raw = _stream(sim.seed, replication).standard_exponential((sim.num_updates, n + 1))
    services = shift + raw[:, :n] / rate
    d = config.deadline
    if isinstance(d, FixedDeadline):
        deadlines = np.full(sim.num_updates, float(d.horizon))
    elif isinstance(d, ExponentialDeadline):
        deadlines = shift + raw[:, n] / d.rate
    else:
        deadlines = np.full(sim.num_updates, np.inf)
    kth = np.partition(services, k - 1, axis=1)[:, k - 1]
    terminations = np.minimum(kth, deadlines)
    generations = np.concatenate(([0.0], np.cumsum(terminations)[:-1]))
    own = services[:, sim.tracked_device - 1]
    received = own <= terminations
    return _Trajectory(services, deadlines, terminations, generations, received, float(own[0]))


def _cycles(traj, config):
    """Reception indices plus (M, W, X^S, previous X^S) for every renewal cycle."""
    idx = np.flatnonzero(traj.received)
    if idx.size == 0:
        raise SimulationDivergenceError(
            f"no update reached the tracked device in {traj.terminations.size} updates for {config}"
        )
    gen, term = traj.generations, traj.terminations
    ends = gen[idx] + term[idx]
    prev_end = np.concatenate(([0.0], ends[:-1]))
    prev_xs = np.concatenate(([traj.initial_age], term[idx][:-1]))
    m = np.diff(np.concatenate(([-1], idx)))
    w = gen[idx] - prev_end
    return idx, m, w, term[idx], prev_xs


def _cycle_table(traj, config, tracked):
    idx, m, w, xs, prev = _cycles(traj, config)
    that = traj.services[idx, tracked - 1]
    area = (prev + w) * that + (prev + w / 2) * w + xs**2 / 2
    span = w + xs
    peak = prev + w + that
    return {"m": m, "w": w, "xs": xs, "that": that, "area": area, "span": span, "peak": peak,
            "last": int(idx[-1])}


def _sawtooth_area(traj, tracked, last):
    """Direct time integral of the age curve over [0, end of update ``last``]."""
    gen = traj.generations[: last + 1]
    term = traj.terminations[: last + 1]
    rec = traj.received[: last + 1]
    own = traj.services[: last + 1, tracked - 1]
    # generation time of the freshest update held at the start of each interval
    held = np.where(rec, gen, -np.inf)
    held = np.maximum.accumulate(np.concatenate(([-traj.initial_age], held[:-1])))
    start_age = gen - held
    grow = np.where(rec, own, term)
    return float(np.sum(start_age * grow + term**2 / 2)), float(gen[-1] + term[-1])


@dataclass(frozen=True)
class _Replication:
    table: dict
    sawtooth_area: float
    horizon: float
    received: np.ndarray


def _replicate(config, sim, replication):
    traj = _run(config, sim, replication)
    table = _cycle_table(traj, config, sim.tracked_device)
    area, horizon = _sawtooth_area(traj, sim.tracked_device, table["last"])
    return _Replication(table, area, horizon, traj.received)


def _replications(config, sim, workers):
    reps = range(sim.replications)
    if workers is None or workers <= 1 or sim.replications == 1:
        return [_replicate(config, sim, r) for r in reps]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map preserves replication order, so the merge below is schedule-independent
        return list(pool.map(lambda r: _replicate(config, sim, r), reps))


def _check_consistency(rep, config):
    a = rep.table["area"]
    renewal = math.fsum(a) / math.fsum(rep.table["span"])
    sawtooth = rep.sawtooth_area / rep.horizon
    if abs(renewal - sawtooth) > CONSISTENCY_TOL * max(1.0, abs(sawtooth)):
        raise AssertionError(f"age bookkeeping mismatch {renewal!r} vs {sawtooth!r} for {config}")


def simulate(config: SystemConfig, sim: SimConfig = SimConfig(), workers=None) -> SimResult:
    """Simulate ``sim.replications`` independent trajectories and pool them.

    ``workers`` only changes the execution schedule, never the result.
    """
    reps = _replications(config, sim, workers)
    b = sim.num_batches
    ratio_batches, peak_batches, success_batches = [], [], []
    for rep in reps:
        _check_consistency(rep, config)
        t = rep.table
        if len(t["area"]) < b:
            raise SimulationDivergenceError(
                f"only {len(t['area'])} receptions, fewer than the {b} batches needed, for {config}"
            )
        area_b = _equal_batches(t["area"], b).sum(axis=1)
        span_b = _equal_batches(t["span"], b).sum(axis=1)
        ratio_batches.append(area_b / span_b)
        peak_batches.append(_equal_batches(t["peak"], b).mean(axis=1))
        success_batches.append(_equal_batches(rep.received, b).mean(axis=1))

    def pooled(key):
        return np.concatenate([rep.table[key] for rep in reps])

    area, span, peak = pooled("area"), pooled("span"), pooled("peak")
    received = np.concatenate([rep.received for rep in reps])
    return SimResult(
        average_aoi=float(math.fsum(area) / math.fsum(span)),
        average_peak_aoi=float(np.mean(peak)),
        ci_halfwidth_aoi=_halfwidth(np.concatenate(ratio_batches)),
        ci_halfwidth_peak=_halfwidth(np.concatenate(peak_batches)),
        success_fraction=float(np.mean(received)),
        ci_halfwidth_success=_halfwidth(np.concatenate(success_batches)),
        cycles=int(area.size),
        receptions=int(np.count_nonzero(received)),
        updates=int(received.size),
        mean_wait=float(np.mean(pooled("w"))),
        mean_intervals=float(np.mean(pooled("m"))),
        mean_success_intergen=float(np.mean(pooled("xs"))),
        mean_service=float(np.mean(pooled("that"))),
        config=config,
        sim=sim,
    )


def empirical_renewal_samples(config: SystemConfig, sim: SimConfig = SimConfig()):
    """Renewal cycles of every replication, in replication then time order."""
    out = []
    for rep in _replications(config, sim, None):
        t = rep.table
        out.extend(
            RenewalSample(int(m), float(w), float(xs), float(th), float(a), float(y), float(p))
            for m, w, xs, th, a, y, p in zip(
                t["m"], t["w"], t["xs"], t["that"], t["area"], t["span"], t["peak"])
        )
    return out


EVENT_LOG_COLUMNS = ("replication", "update_index", "generation_time", "termination_time",
                     "deadline_draw")


def write_event_log(config: SystemConfig, sim: SimConfig, stream, limit=None):
    """Write the per-update event log as CSV; ``limit`` caps updates per replication.

    Times are absolute; the deadline draw and service times are measured from
    the update's generation.
    """
    n = config.num_devices
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(EVENT_LOG_COLUMNS + tuple(f"service_{i + 1}" for i in range(n)) + ("received",))
    for r in range(sim.replications):
        traj = _run(config, sim, r)
        stop = traj.terminations.size if limit is None else min(limit, traj.terminations.size)
        for j in range(stop):
            writer.writerow([
                r, j, repr(float(traj.generations[j])),
                repr(float(traj.generations[j] + traj.terminations[j])),
                repr(float(traj.deadlines[j])),
                *(repr(float(s)) for s in traj.services[j]),
                int(traj.received[j]),
            ])


__all__ = [
    "EVENT_LOG_COLUMNS",
    "RenewalSample",
    "SimConfig",
    "SimResult",
    "batch_confidence",
    "empirical_renewal_samples",
    "simulate",
    "write_event_log",
]
