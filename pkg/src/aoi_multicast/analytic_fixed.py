"""Closed-form average AoI and average peak AoI under a fixed deadline.

Also covers the no-deadline policy, which is the same algebra with every
deadline term (``V`` and the rank exceed probabilities) set to zero.

Notation: ``Z[h]`` is the probability that the deadline fires before the h-th
reception, ``B/U/V`` the coefficient families from :mod:`.stochastic`.
"""

from __future__ import annotations

from .config import FixedDeadline, InfiniteDeadline, SystemConfig
from .errors import ConfigError, DivergenceError, ImpossibleEventError
from .report import AoiReport, CaseProbabilities, build_report, wait_moments
from .stochastic import MP, coefficient_table, rank_probabilities_mp

# Uncorrected formula variants that can be switched on for regression tests.
PRINTED_DEFECTS = frozenset({"cf2_plus_sign", "tnk2_missing_one", "that_unshifted"})


def _require_fixed(config):
    if not isinstance(config.deadline, (FixedDeadline, InfiniteDeadline)):
        raise ConfigError(f"fixed-deadline engine cannot evaluate policy {config.policy!r}")


class _Pieces:
    """Every intermediate of the fixed-deadline analysis, in 50-digit arithmetic."""

    def __init__(self, config, printed=frozenset()):
        _require_fixed(config)
        unknown = set(printed) - PRINTED_DEFECTS
        if unknown:
            raise ConfigError(f"unknown printed-form variants {sorted(unknown)}")
        self.config = config
        self.printed = frozenset(printed)
        self.n = config.num_devices
        self.k = config.threshold
        self.lam = MP.mpf(config.service.rate)
        self.c = MP.mpf(config.service.shift)
        self.infinite = isinstance(config.deadline, InfiniteDeadline)
        self.td = None if self.infinite else MP.mpf(config.deadline.horizon)
        self.table = coefficient_table(config)
        self.exceed, _ = rank_probabilities_mp(config, self.table)

    def _v(self, h, j):
        return MP.zero if self.infinite else self.table.V[h][j]

    def p_success(self):
        return MP.fsum(1 - self.exceed[h] for h in range(1, self.k + 1)) / self.n

    def p_f2(self):
        if self.infinite:
            return MP.zero
        n, k, z = self.n, self.k, self.exceed
        num = (n - k) * z[k] + MP.fsum(z[h] for h in range(1, k + 1))
        tail = MP.fsum(z[h] for h in range(k + 1, n + 1))
        dev_late = n * MP.exp(-self.lam * (self.td - self.c))
        if "cf2_plus_sign" in self.printed:
            den = dev_late + (n - k) + tail
        else:
            # inclusion-exclusion: P(late) + P(after K-th) - P(both)
            den = dev_late + (n - k) - tail
        return num / den

    def p_s1(self):
        return self.k * (1 - self.exceed[self.k]) / (self.n * self.p_success())

    def tnk_moments(self):
        k = self.k
        zk = self.exceed[k]
        if zk >= 1:
            raise ImpossibleEventError("the K-th reception can never beat the deadline")
        lam, c = self.lam, self.c
        first, second = [], []
        for j, (b, u) in enumerate(zip(self.table.B[k], self.table.U[k])):
            v = self._v(k, j)
            a = lam * u
            td_term = 0 if self.infinite else (1 + self.td * a)
            first.append(b / (lam * u**2) * (1 + c * a - td_term * v))
            one = 0 if "tnk2_missing_one" in self.printed else 1
            td2 = 0 if self.infinite else ((1 + self.td * a) ** 2 + one)
            second.append(b / (lam**2 * u**3) * ((1 + c * a) ** 2 + one - td2 * v))
        norm = 1 - zk
        return MP.fsum(first) / norm, MP.fsum(second) / norm

    def failure_moments(self):
        m1, m2 = self.tnk_moments()
        pf2 = self.p_f2()
        if self.infinite:
            return m1, m2
        return (1 - pf2) * m1 + pf2 * self.td, (1 - pf2) * m2 + pf2 * self.td**2

    def success_moments(self):
        m1, m2 = self.tnk_moments()
        ps1 = self.p_s1()
        if self.infinite:
            return m1, m2
        return ps1 * m1 + (1 - ps1) * self.td, ps1 * m2 + (1 - ps1) * self.td**2

    def e_that(self):
        ps = self.p_success()
        if ps <= 0:
            raise DivergenceError("success probability is zero: the average AoI is infinite")
        lam, c = self.lam, self.c
        terms = []
        for h in range(1, self.k + 1):
            for j, (b, u) in enumerate(zip(self.table.B[h], self.table.U[h])):
                a = lam * u
                if self.infinite:
                    decay = MP.zero
                elif "that_unshifted" in self.printed:
                    decay = MP.exp(-a * self.td) * (a * self.td + 1)
                else:
                    decay = self.table.V[h][j] * (a * self.td + 1)
                terms.append(b * (c * a + 1 - decay) / (lam * u**2))
        return MP.fsum(terms) / (self.n * ps)

    def report(self):
        ps = self.p_success()
        if ps <= 0:
            raise DivergenceError("success probability is zero: the average AoI is infinite")
        pf2, ps1 = self.p_f2(), self.p_s1()
        e_xf, e_xf2 = self.failure_moments()
        e_xs, e_xs2 = self.success_moments()
        return build_report(
            self.config,
            p_success=ps, p_f1=1 - pf2, p_f2=pf2, p_s1=ps1, p_s2=1 - ps1,
            e_xf=e_xf, e_xf2=e_xf2, e_xs=e_xs, e_xs2=e_xs2,
            e_that=self.e_that(), tnk=self.tnk_moments(),
        )


def case_probabilities_fixed(config: SystemConfig) -> CaseProbabilities:
    p = _Pieces(config)
    ps = p.p_success()
    if ps <= 0:
        raise DivergenceError("success probability is zero: the average AoI is infinite")
    pf2, ps1 = p.p_f2(), p.p_s1()
    return CaseProbabilities(float(ps), float(1 - pf2), float(pf2), float(ps1), float(1 - ps1))


def conditional_tnk_moments_fixed(config):
    """First and second moment of the K-th reception time given it beats the deadline.

    The same pair conditions on a failed (K others first) and a successful
    (device among the first K) reception.
    """
    first, second = _Pieces(config).tnk_moments()
    return float(first), float(second)


def intergen_failure_moments_fixed(config):
    e1, e2 = _Pieces(config).failure_moments()
    return float(e1), float(e2)


def intergen_success_moments_fixed(config):
    e1, e2 = _Pieces(config).success_moments()
    return float(e1), float(e2)


def successful_service_expectation_fixed(config):
    """Mean service time of the updates the tracked device actually receives."""
    return float(_Pieces(config).e_that())


def average_aoi_fixed(config: SystemConfig, printed=frozenset()) -> AoiReport:
    """Full report for a fixed (or absent) deadline.

    ``printed`` selects uncorrected formula variants from ``PRINTED_DEFECTS``;
    leave it empty for the correct engine.
    """
    return _Pieces(config, printed).report()


__all__ = [
    "PRINTED_DEFECTS",
    "average_aoi_fixed",
    "case_probabilities_fixed",
    "conditional_tnk_moments_fixed",
    "intergen_failure_moments_fixed",
    "intergen_success_moments_fixed",
    "successful_service_expectation_fixed",
    "wait_moments",
]
