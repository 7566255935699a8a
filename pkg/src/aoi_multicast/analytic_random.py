"""Closed-form average AoI and average peak AoI under a shifted-exponential deadline.

``R[h]`` (exceed) is the probability that the deadline fires before the h-th
reception and ``S[h]`` (success) its complement; ``H[h][j] = rate*U[h][j] + rate_d``.
Every conditional density below is a finite mixture of ``exp(-H (t - shift))``
terms; each moment is normalized by the exact mass of its own density.
"""

from __future__ import annotations

from .config import ExponentialDeadline, SystemConfig
from .errors import ConfigError, DivergenceError, ImpossibleEventError
from .report import AoiReport, CaseProbabilities, build_report
from .stochastic import MP, coefficient_table, rank_probabilities_mp

PRINTED_DEFECTS = frozenset({
    "tnk_random_extra_factors",
    "that_random_missing_n",
    "df2_n_factor",
    "s1_exceed_convention",
})


def _mix_first(c, h):
    # integral of (c + s) h exp(-h s) ds scaled by 1/h: (c H + 1) / H^2
    return (c * h + 1) / h**2


def _mix_second(c, h):
    return (c**2 * h**2 + 2 * c * h + 2) / h**3


class _Pieces:
    def __init__(self, config, printed=frozenset()):
        if not isinstance(config.deadline, ExponentialDeadline):
            raise ConfigError(f"random-deadline engine cannot evaluate policy {config.policy!r}")
        unknown = set(printed) - PRINTED_DEFECTS
        if unknown:
            raise ConfigError(f"unknown printed-form variants {sorted(unknown)}")
        self.config = config
        self.printed = frozenset(printed)
        self.n = config.num_devices
        self.k = config.threshold
        self.lam = MP.mpf(config.service.rate)
        self.lam_d = MP.mpf(config.deadline.rate)
        self.c = MP.mpf(config.service.shift)
        self.table = coefficient_table(config)
        self.exceed, self.success = rank_probabilities_mp(config, self.table)

    def _sum_k(self, weight, kernel):
        """sum_j B[K][j] * weight(U) * kernel(c, H) over the K-th rank terms."""
        k, t = self.k, self.table
        return MP.fsum(b * weight(u) * kernel(self.c, hh)
                       for b, u, hh in zip(t.B[k], t.U[k], t.H[k]))

    def _sum_upto_k(self, weight, kernel):
        t = self.table
        return MP.fsum(b * weight(u) * kernel(self.c, hh)
                       for h in range(1, self.k + 1)
                       for b, u, hh in zip(t.B[h], t.U[h], t.H[h]))

    def p_success(self):
        return MP.fsum(self.success[h] for h in range(1, self.k + 1)) / self.n

    def p_f2(self):
        n, k, r = self.n, self.k, self.exceed
        tot = self.lam + self.lam_d
        num = (MP.fsum(r[h] for h in range(1, k + 1)) + (n - k) * r[k]) * tot
        den = n * self.lam_d + (n - k - MP.fsum(r[h] for h in range(k + 1, n + 1))) * tot
        return num / den

    def p_s1(self):
        k = self.k
        probs = self.exceed if "s1_exceed_convention" in self.printed else self.success
        return k * probs[k] / MP.fsum(probs[h] for h in range(1, k + 1))

    def tnk_moments(self):
        sk = self.success[self.k]
        if sk <= 0:
            raise ImpossibleEventError("the K-th reception can never beat the deadline")
        lam = self.lam
        if "tnk_random_extra_factors" in self.printed:
            n, k, c = self.n, self.k, self.c
            norm = (n - k) * (1 - self.exceed[k])
            if norm == 0:
                raise ImpossibleEventError("printed form undefined for K = N")
            first = self._sum_k(lambda u: lam, lambda c_, h: (c * n * h + 1) / h**2) / norm
            second = self._sum_k(
                lambda u: lam, lambda c_, h: (c**2 * n * h**2 + 2 * c * h + 2) / h**3) / norm
            return first, second
        return (self._sum_k(lambda u: lam, _mix_first) / sk,
                self._sum_k(lambda u: lam, _mix_second) / sk)

    def deadline_f2_moments(self):
        n, k, r = self.n, self.k, self.exceed
        late_weight = n if "df2_n_factor" in self.printed else n - k
        norm = MP.fsum(r[h] for h in range(1, k + 1)) + (n - k) * r[k]
        if norm <= 0:
            raise ImpossibleEventError("the deadline can never fire first")
        lam_d = self.lam_d
        out = []
        for kernel in (_mix_first, _mix_second):
            own = self._sum_upto_k(lambda u: lam_d / u, kernel)
            late = self._sum_k(lambda u: lam_d / u, kernel)
            out.append((own + late_weight * late) / norm)
        return tuple(out)

    def deadline_s2_moments(self):
        n, k, r = self.n, self.k, self.exceed
        if k == 1:
            raise ImpossibleEventError(
                "with K = 1 the device cannot receive an update whose deadline "
                "fires before the first reception"
            )
        norm = k * r[k] - MP.fsum(r[h] for h in range(1, k + 1))
        lam_d = self.lam_d
        out = []
        for kernel in (_mix_first, _mix_second):
            kth = self._sum_k(lambda u: lam_d / u, kernel)
            own = self._sum_upto_k(lambda u: lam_d / u, kernel)
            out.append((k * kth - own) / norm)
        return tuple(out)

    def failure_moments(self):
        m1, m2 = self.tnk_moments()
        pf2 = self.p_f2()
        d1, d2 = self.deadline_f2_moments()
        return (1 - pf2) * m1 + pf2 * d1, (1 - pf2) * m2 + pf2 * d2

    def success_moments(self):
        m1, m2 = self.tnk_moments()
        if self.k == 1:
            return m1, m2
        ps1 = self.p_s1()
        d1, d2 = self.deadline_s2_moments()
        return ps1 * m1 + (1 - ps1) * d1, ps1 * m2 + (1 - ps1) * d2

    def e_that(self):
        ps = self.p_success()
        if ps <= 0:
            raise DivergenceError("success probability is zero: the average AoI is infinite")
        lam = self.lam
        total = self._sum_upto_k(lambda u: lam, _mix_first)
        if "that_random_missing_n" in self.printed:
            return total / ps
        return total / (self.n * ps)

    def report(self):
        ps = self.p_success()
        if ps <= 0:
            raise DivergenceError("success probability is zero: the average AoI is infinite")
        pf2 = self.p_f2()
        ps1 = MP.one if self.k == 1 else self.p_s1()
        e_xf, e_xf2 = self.failure_moments()
        e_xs, e_xs2 = self.success_moments()
        s2 = (None, None) if self.k == 1 else self.deadline_s2_moments()
        return build_report(
            self.config,
            p_success=ps, p_f1=1 - pf2, p_f2=pf2, p_s1=ps1, p_s2=1 - ps1,
            e_xf=e_xf, e_xf2=e_xf2, e_xs=e_xs, e_xs2=e_xs2,
            e_that=self.e_that(), tnk=self.tnk_moments(),
            deadline_f2=self.deadline_f2_moments(), deadline_s2=s2,
        )


def case_probabilities_random(config: SystemConfig) -> CaseProbabilities:
    p = _Pieces(config)
    ps, pf2 = p.p_success(), p.p_f2()
    ps1 = MP.one if p.k == 1 else p.p_s1()
    return CaseProbabilities(float(ps), float(1 - pf2), float(pf2), float(ps1), float(1 - ps1))


def conditional_tnk_moments_random(config):
    first, second = _Pieces(config).tnk_moments()
    return float(first), float(second)


def conditional_deadline_moments_failure(config):
    """Deadline moments given it fired before both the K-th and the device's own reception."""
    first, second = _Pieces(config).deadline_f2_moments()
    return float(first), float(second)


def conditional_deadline_moments_success(config):
    """Deadline moments given the device received the update but the K-th
    reception did not happen before the deadline.  Impossible for K = 1."""
    first, second = _Pieces(config).deadline_s2_moments()
    return float(first), float(second)


def intergen_moments_random(config):
    """``(E[X^F], E[(X^F)^2], E[X^S], E[(X^S)^2])``."""
    p = _Pieces(config)
    return tuple(float(x) for x in (*p.failure_moments(), *p.success_moments()))


def successful_service_expectation_random(config):
    return float(_Pieces(config).e_that())


def average_aoi_random(config: SystemConfig, printed=frozenset()) -> AoiReport:
    return _Pieces(config, printed).report()


__all__ = [
    "PRINTED_DEFECTS",
    "average_aoi_random",
    "case_probabilities_random",
    "conditional_deadline_moments_failure",
    "conditional_deadline_moments_success",
    "conditional_tnk_moments_random",
    "intergen_moments_random",
    "successful_service_expectation_random",
]
