"""Quadrature oracle: every probability and conditional moment as a 1-D integral.

The oracle deliberately uses a different decomposition from the closed forms.
It conditions on the tracked device's own service time ``T_n`` and on the order
statistics ``O_r`` of the *other* N-1 devices, so no exchangeability factor
(K/N, (N-K)/N) and no coefficient table is ever used:

* success      ``T_n <= D`` and ``O_K > T_n``
* S1           the K-th reception is ``O_{K-1}`` (device earlier) or ``T_n``
               itself (exactly K-1 others earlier), and beats ``D``
* F1           the K-th reception is ``O_K``, beats ``D`` and ``T_n``
* F2           ``D < T_n`` and ``O_K > D``
* S2           ``T_n <= D`` and ``O_{K-1} > D``

For a fixed deadline ``D`` is a constant; for the random policy the integrand
carries the deadline density or survival function.  The AoI assembly is also
re-derived here from the cycle-area decomposition rather than imported.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from scipy import integrate

from .config import ExponentialDeadline, FixedDeadline, InfiniteDeadline, SystemConfig
from .errors import ConfigError, DivergenceError, ImpossibleEventError, PrecisionError
from .report import AoiReport, CaseProbabilities, ConditionalMoments, MomentSet
from .stochastic import os_cdf, os_pdf, os_sf, service_cdf, service_pdf, service_sf


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    tail_cutoff: float | None = None  # explicit upper limit; None derives it from decay rates
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ConfigError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ConfigError("max_subdivisions must be >= 1")


DEFAULT_SPEC = QuadratureSpec()


class _Integrals:
    """Joint (unnormalized) event masses and restricted moments for one scenario."""

    def __init__(self, config, spec):
        self.config = config
        self.spec = spec
        self.n = config.num_devices
        self.k = config.threshold
        self.model = config.service
        self.c = config.service.shift
        d = config.deadline
        self.fixed = isinstance(d, FixedDeadline)
        self.infinite = isinstance(d, InfiniteDeadline)
        self.random = isinstance(d, ExponentialDeadline)
        self.td = d.horizon if self.fixed else math.inf
        self.lam_d = d.rate if self.random else 0.0
        slowest = min(self.model.rate, self.lam_d) if self.random else self.model.rate
        self.slowest = slowest
        self.fastest = self.model.rate * self.n + self.lam_d
        if spec.tail_cutoff is not None and spec.tail_cutoff <= self.c:
            raise ConfigError("tail cutoff must exceed the service shift")
        self.worst_rel_err = 0.0

    # ---- densities ---------------------------------------------------------
    def f(self, t):
        return service_pdf(t, self.model)

    def F(self, t):
        return service_cdf(t, self.model)

    def Fbar(self, t):
        return service_sf(t, self.model)

    def g(self, x):
        """Random deadline density."""
        s = x - self.c
        return 0.0 if s <= 0 else self.lam_d * math.exp(-self.lam_d * s)

    def Gbar(self, x):
        """P(deadline >= x); fixed deadlines are handled by the integration limit."""
        if not self.random:
            return 1.0
        s = x - self.c
        return 1.0 if s <= 0 else math.exp(-self.lam_d * s)

    def others_sf(self, x, r):
        """P(r-th smallest of the other N-1 devices > x)."""
        m = self.n - 1
        if r < 1:
            return 0.0
        if r > m:
            return 1.0
        return os_sf(x, r, m, self.model)

    def others_exactly(self, x, r):
        """P(exactly r of the other N-1 devices finished by x)."""
        m = self.n - 1
        F = self.F(x)
        return math.comb(m, r) * F**r * (1.0 - F) ** (m - r) if F < 1.0 else float(r == m)

    def others_pdf(self, x, r):
        return os_pdf(x, r, self.n - 1, self.model)

    # ---- quadrature --------------------------------------------------------
    def _span(self, a):
        tol = self.spec.abs_tol
        budget = math.log(1 / tol) + self.n * math.log(2) + 2 * math.log(1 + a + 1 / self.slowest) + 10
        return budget / self.slowest

    def upper(self, a):
        if self.spec.tail_cutoff is not None:
            return max(self.spec.tail_cutoff, a)
        return a + self._span(a)

    def integrate(self, fn, a, b=None):
        """Adaptive Gauss-Kronrod over [a, b]; ``b=None`` means the truncated tail."""
        if b is None or math.isinf(b):
            b = self.upper(a)
        if b <= a:
            return 0.0
        # geometric breakpoints resolve the peak near ``a`` before the long tail
        points, w = [], 0.25 / self.fastest
        while a + w < b:
            points.append(a + w)
            w *= 4
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(
                fn, a, b, epsabs=0.0, epsrel=self.spec.rel_tol,
                limit=self.spec.max_subdivisions, points=points or None,
            )
        bound = max(self.spec.rel_tol * abs(val), self.spec.abs_tol * self.spec.rel_tol)
        if err > 10 * bound:
            raise PrecisionError(
                f"quadrature did not converge on [{a}, {b}]: estimate {val!r} +/- {err!r}",
                achieved=err,
            )
        if val != 0:
            self.worst_rel_err = max(self.worst_rel_err, err / abs(val))
        return val

    # ---- events ------------------------------------------------------------
    def success(self, m=0):
        """E[T_n^m ; success]."""
        k = self.k
        return self.integrate(
            lambda t: t**m * self.f(t) * self.Gbar(t) * self.others_sf(t, k), self.c, self.td)

    def s1(self, m=0):
        """E[T_(K)^m ; device among the first K, K-th reception before the deadline]."""
        k = self.k

        def integrand(y):
            # device is the K-th itself: exactly K-1 others before it
            dens = self.f(y) * self.others_exactly(y, k - 1)
            if k >= 2:
                # device strictly earlier: the K-th reception is the (K-1)-th other
                dens += self.others_pdf(y, k - 1) * self.F(y)
            return y**m * dens * self.Gbar(y)

        return self.integrate(integrand, self.c, self.td)

    def f1(self, m=0):
        """E[T_(K)^m ; K others finish first, before the deadline]."""
        k = self.k
        if k > self.n - 1:
            return 0.0
        return self.integrate(
            lambda y: y**m * self.others_pdf(y, k) * self.Fbar(y) * self.Gbar(y), self.c, self.td)

    def f2(self, m=0):
        """E[D^m ; deadline fires before the K-th and before the device's reception]."""
        k = self.k
        if self.infinite:
            return 0.0
        if self.fixed:
            return self.td**m * self.Fbar(self.td) * self.others_sf(self.td, k)
        return self.integrate(
            lambda x: x**m * self.g(x) * self.Fbar(x) * self.others_sf(x, k), self.c)

    def s2(self, m=0):
        """E[D^m ; device received, deadline fires before the K-th reception]."""
        k = self.k
        if self.infinite or k == 1:
            return 0.0
        if self.fixed:
            return self.td**m * self.F(self.td) * self.others_sf(self.td, k - 1)
        return self.integrate(
            lambda x: x**m * self.g(x) * self.F(x) * self.others_sf(x, k - 1), self.c)

    def exceed(self, h):
        """P(deadline fires before the h-th of all N receptions)."""
        n = self.n
        if self.infinite:
            return 0.0
        if self.fixed:
            return self.integrate(lambda t: os_pdf(t, h, n, self.model), self.td)
        return self.integrate(lambda x: self.g(x) * os_sf(x, h, n, self.model), self.c)

    def rank_success(self, h):
        n = self.n
        if self.infinite:
            return 1.0
        if self.fixed:
            return self.integrate(lambda t: os_pdf(t, h, n, self.model), self.c, self.td)
        return self.integrate(lambda x: self.g(x) * os_cdf(x, h, n, self.model), self.c)


_EVENTS = ("C_S", "C_F1", "C_F2", "C_S1", "C_S2")


def oracle_probability(event, config: SystemConfig, spec: QuadratureSpec = DEFAULT_SPEC):
    """Probability of a reception outcome by direct quadrature.

    ``event`` is one of ``C_S`` (success), ``C_F1``/``C_F2`` (conditional on a
    failure), ``C_S1``/``C_S2`` (conditional on a success), or a tuple
    ``("exceed", h)`` / ``("success", h)`` for the per-rank deadline outcome.
    """
    q = _Integrals(config, spec)
    if isinstance(event, tuple):
        kind, h = event
        if not (isinstance(h, int) and 1 <= h <= q.n):
            raise ConfigError(f"rank must be in 1..{q.n}, got {h!r}")
        if kind == "exceed":
            return q.exceed(h)
        if kind == "success":
            return q.rank_success(h)
        raise ConfigError(f"unknown per-rank event {kind!r}")
    if event not in _EVENTS:
        raise ConfigError(f"unknown event {event!r}; expected one of {_EVENTS}")
    if event == "C_S":
        return q.success()
    if event in ("C_F1", "C_F2"):
        f1, f2 = q.f1(), q.f2()
        if f1 + f2 == 0:
            return 1.0 if event == "C_F1" else 0.0
        return (f1 if event == "C_F1" else f2) / (f1 + f2)
    ps = q.success()
    return (q.s1() if event == "C_S1" else q.s2()) / ps


_QUANTITIES = ("tnk|F1", "tnk|S1", "deadline|F2", "deadline|S2", "that|S")

IMPOSSIBLE_BELOW = 1e-12


def oracle_conditional_moment(quantity, order, config: SystemConfig,
                              spec: QuadratureSpec = DEFAULT_SPEC):
    """E[X^order | event] as a ratio of two quadratures.

    ``quantity``: ``tnk|F1``, ``tnk|S1`` (K-th reception time), ``deadline|F2``,
    ``deadline|S2`` (deadline value), ``that|S`` (service time of a received update).
    """
    if quantity not in _QUANTITIES:
        raise ConfigError(f"unknown quantity {quantity!r}; expected one of {_QUANTITIES}")
    if order not in (1, 2):
        raise ConfigError("order must be 1 or 2")
    q = _Integrals(config, spec)
    fn = {"tnk|F1": q.f1, "tnk|S1": q.s1, "deadline|F2": q.f2,
          "deadline|S2": q.s2, "that|S": q.success}[quantity]
    mass = fn(0)
    if mass < IMPOSSIBLE_BELOW:
        raise ImpossibleEventError(
            f"conditioning event of {quantity} has probability {mass:.3g} < {IMPOSSIBLE_BELOW}")
    return fn(order) / mass


def oracle_aoi(config: SystemConfig, spec: QuadratureSpec = DEFAULT_SPEC) -> AoiReport:
    """Independent AoI report assembled from quadrature pieces only."""
    q = _Integrals(config, spec)
    s = [q.success(m) for m in range(3)]
    if s[0] <= 0:
        raise DivergenceError("success probability is zero: the average AoI is infinite")
    s1 = [q.s1(m) for m in range(3)]
    s2 = [q.s2(m) for m in range(3)]
    f1 = [q.f1(m) for m in range(3)]
    f2 = [q.f2(m) for m in range(3)]

    p = s[0]
    fail = f1[0] + f2[0]
    p_f1, p_f2 = (f1[0] / fail, f2[0] / fail) if fail > 0 else (1.0, 0.0)
    p_s1, p_s2 = s1[0] / p, s2[0] / p
    tnk1, tnk2 = s1[1] / s1[0], s1[2] / s1[0]
    if fail > 0:
        e_xf, e_xf2 = (f1[1] + f2[1]) / fail, (f1[2] + f2[2]) / fail
    else:
        e_xf, e_xf2 = tnk1, tnk2  # never used: no failed cycles
    e_xs, e_xs2 = (s1[1] + s2[1]) / p, (s1[2] + s2[2]) / p
    e_that = s[1] / p

    # W = sum of (M - 1) failed inter-generation times, M ~ Geometric(p) on {1, 2, ...}
    q_fail = 1.0 - p
    lost = q_fail / p                       # E[M - 1]
    lost_ff = 2 * q_fail**2 / p**2          # E[(M - 1)(M - 2)]
    e_w = lost * e_xf
    e_w2 = lost * e_xf2 + lost_ff * e_xf**2
    e_m = 1.0 / p

    area = e_xs * e_that + e_w * e_that + e_xs * e_w + 0.5 * e_w2 + 0.5 * e_xs2
    span = e_w + e_xs
    aoi = area / span
    peak = e_xs + e_w + e_that

    if q.random:
        df2 = (f2[1] / f2[0], f2[2] / f2[0]) if f2[0] > 0 else (None, None)
    else:
        df2 = (None, None)
    if q.random and s2[0] > 0:
        ds2 = (s2[1] / s2[0], s2[2] / s2[0])
    else:
        ds2 = (None, None)

    return AoiReport(
        average_aoi=aoi,
        average_peak_aoi=peak,
        cases=CaseProbabilities(p, p_f1, p_f2, p_s1, p_s2),
        moments=MomentSet(e_xf, e_xf2, e_xs, e_xs2, e_w, e_w2, e_m, e_that),
        conditionals=ConditionalMoments(tnk1, tnk2, *df2, *ds2),
        config=config,
        source="oracle",
        quadrature_error=q.worst_rel_err,
    )


def oracle_rank_probabilities(config, spec=DEFAULT_SPEC):
    """``(exceed, success)`` dictionaries keyed by rank, by quadrature."""
    q = _Integrals(config, spec)
    ranks = range(1, q.n + 1)
    return {h: q.exceed(h) for h in ranks}, {h: q.rank_success(h) for h in ranks}


@dataclass(frozen=True)
class DiscrepancyEntry:
    name: str
    closed_form_value: float | None
    oracle_value: float | None
    relative_delta: float


@dataclass(frozen=True)
class DiscrepancyReport:
    entries: tuple = field(default_factory=tuple)
    threshold: float = 1e-8

    @property
    def worst(self):
        return max(self.entries, key=lambda e: e.relative_delta, default=None)

    @property
    def worst_delta(self):
        w = self.worst
        return 0.0 if w is None else w.relative_delta

    @property
    def passed(self):
        return self.worst_delta <= self.threshold

    def failures(self):
        return [e for e in self.entries if e.relative_delta > self.threshold]

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "worst_delta": self.worst_delta,
            "worst": None if self.worst is None else self.worst.name,
            "passed": self.passed,
            "entries": [e.__dict__ for e in self.entries],
        }


ABSOLUTE_BELOW = 1e-12


def relative_delta(a, b):
    """Relative difference, falling back to absolute when both values are below 1e-12."""
    if a is None and b is None:
        return 0.0
    if a is None or b is None:
        return math.inf
    scale = max(abs(a), abs(b))
    if scale < ABSOLUTE_BELOW:
        return abs(a - b)
    return abs(a - b) / scale


def compare_reports(a: AoiReport, b: AoiReport, threshold=1e-8) -> DiscrepancyReport:
    if a.config != b.config:
        raise ConfigError(f"cannot compare reports of different scenarios: {a.config} vs {b.config}")
    fa, fb = a.flat(), b.flat()
    entries = tuple(
        DiscrepancyEntry(name, fa[name], fb[name], relative_delta(fa[name], fb[name]))
        for name in fa
    )
    return DiscrepancyReport(entries, threshold)


__all__ = [
    "DEFAULT_SPEC",
    "DiscrepancyEntry",
    "DiscrepancyReport",
    "QuadratureSpec",
    "compare_reports",
    "oracle_aoi",
    "oracle_conditional_moment",
    "oracle_probability",
    "oracle_rank_probabilities",
    "relative_delta",
]
