"""Shifted-exponential service times, their order statistics, and the coefficient
families shared by every closed form.

The closed forms expand the order-statistic density of rank ``h`` as an
alternating sum over ``j``::

    f_h(t) = sum_j B[h][j] * rate * exp(-rate * U[h][j] * (t - shift))

with ``B[h][j] = h * C(N, h) * C(h-1, j) * (-1)**j`` and ``U[h][j] = N-h+1+j``.
The ``B`` terms grow combinatorially and cancel, so every sum over them is
evaluated in a private 50-digit mpmath context and only rounded to float at
the public boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath

from .config import ExponentialDeadline, FixedDeadline, InfiniteDeadline, SystemConfig
from .errors import ConfigError

# Dedicated context: never mutated after import, so concurrent readers are safe.
MP = mpmath.MPContext()
MP.dps = 50


def service_cdf(t, model):
    """P(T <= t) for one device's service time."""
    s = t - model.shift
    if s <= 0:
        return 0.0
    return -math.expm1(-model.rate * s)


def service_sf(t, model):
    s = t - model.shift
    if s <= 0:
        return 1.0
    return math.exp(-model.rate * s)


def service_pdf(t, model):
    s = t - model.shift
    if s <= 0:
        return 0.0
    return model.rate * math.exp(-model.rate * s)


def _check_rank(rank, n):
    if not (isinstance(rank, int) and 1 <= rank <= n):
        raise ConfigError(f"rank must be in 1..{n}, got {rank!r}")


def os_pdf(t, rank, n, model):
    """Density of the ``rank``-th smallest of ``n`` i.i.d. service times."""
    _check_rank(rank, n)
    s = t - model.shift
    if s <= 0:
        return 0.0
    lam = model.rate
    F = -math.expm1(-lam * s)
    G = math.exp(-lam * s)
    return rank * math.comb(n, rank) * F ** (rank - 1) * G ** (n - rank) * lam * G


def os_cdf(t, rank, n, model):
    """P(rank-th smallest of n <= t) as a binomial upper tail (all terms positive)."""
    _check_rank(rank, n)
    s = t - model.shift
    if s <= 0:
        return 0.0
    F = -math.expm1(-model.rate * s)
    G = math.exp(-model.rate * s)
    return math.fsum(math.comb(n, i) * F**i * G ** (n - i) for i in range(rank, n + 1))


def os_sf(t, rank, n, model):
    """P(rank-th smallest of n > t), i.e. fewer than ``rank`` finished by ``t``."""
    _check_rank(rank, n)
    s = t - model.shift
    if s <= 0:
        return 1.0
    F = -math.expm1(-model.rate * s)
    G = math.exp(-model.rate * s)
    return math.fsum(math.comb(n, i) * F**i * G ** (n - i) for i in range(rank))


def order_stat_pdf(t, rank, config):
    return os_pdf(t, rank, config.num_devices, config.service)


def order_stat_cdf(t, rank, config):
    return os_cdf(t, rank, config.num_devices, config.service)


def order_stat_sf(t, rank, config):
    return os_sf(t, rank, config.num_devices, config.service)


@dataclass(frozen=True)
class CoefficientTable:
    """Coefficient families keyed by rank ``h`` (1..N), each a tuple over ``j``.

    ``B`` and ``U`` are exact integers.  ``V`` is present only for a fixed
    deadline and ``H`` only for a random one; both hold mpmath values.
    """

    num_devices: int
    B: dict
    U: dict
    V: dict | None = None
    H: dict | None = None

    def normalization(self, h):
        """sum_j B[h][j] / U[h][j]; exactly 1 for every rank."""
        return MP.fsum(MP.mpf(b) / u for b, u in zip(self.B[h], self.U[h]))


def coefficient_table(config: SystemConfig) -> CoefficientTable:
    n = config.num_devices
    lam = MP.mpf(config.service.rate)
    c = MP.mpf(config.service.shift)
    B, U, V, H = {}, {}, {}, {}
    for h in range(1, n + 1):
        lead = h * math.comb(n, h)
        B[h] = tuple(lead * math.comb(h - 1, j) * (-1) ** j for j in range(h))
        U[h] = tuple(n - h + 1 + j for j in range(h))
    d = config.deadline
    if isinstance(d, FixedDeadline):
        span = MP.mpf(d.horizon) - c
        for h in range(1, n + 1):
            V[h] = tuple(MP.exp(-lam * u * span) for u in U[h])
        return CoefficientTable(n, B, U, V=V)
    if isinstance(d, ExponentialDeadline):
        lam_d = MP.mpf(d.rate)
        for h in range(1, n + 1):
            H[h] = tuple(lam * u + lam_d for u in U[h])
        return CoefficientTable(n, B, U, H=H)
    return CoefficientTable(n, B, U)


@dataclass(frozen=True)
class RankSuccessVector:
    """Per-rank deadline outcome: ``exceed_prob[h]`` = P(deadline fires before the
    h-th reception), ``success_prob[h]`` = its complement.  Keyed by rank."""

    exceed_prob: dict
    success_prob: dict


def rank_probabilities_mp(config, table=None):
    """(exceed, success) dictionaries of mpmath values, keyed by rank."""
    table = table or coefficient_table(config)
    n = config.num_devices
    lam = MP.mpf(config.service.rate)
    d = config.deadline
    exceed, success = {}, {}
    for h in range(1, n + 1):
        B, U = table.B[h], table.U[h]
        if isinstance(d, FixedDeadline):
            z = MP.fsum(b * v / u for b, v, u in zip(B, table.V[h], U))
        elif isinstance(d, ExponentialDeadline):
            lam_d = MP.mpf(d.rate)
            # sum B (1/U - rate/H) rewritten as sum B lam_d / (U H): same value, no cancellation
            z = MP.fsum(b * lam_d / (u * hh) for b, u, hh in zip(B, U, table.H[h]))
            s = MP.fsum(b * lam / hh for b, hh in zip(B, table.H[h]))
            exceed[h], success[h] = z, s
            continue
        else:
            z = MP.zero
        exceed[h], success[h] = z, 1 - z
    return exceed, success


def rank_success_probabilities(config: SystemConfig) -> RankSuccessVector:
    exceed, success = rank_probabilities_mp(config)
    return RankSuccessVector(
        exceed_prob={h: float(v) for h, v in exceed.items()},
        success_prob={h: float(v) for h, v in success.items()},
    )


__all__ = [
    "MP",
    "CoefficientTable",
    "InfiniteDeadline",
    "RankSuccessVector",
    "coefficient_table",
    "order_stat_cdf",
    "order_stat_pdf",
    "order_stat_sf",
    "os_cdf",
    "os_pdf",
    "os_sf",
    "rank_probabilities_mp",
    "rank_success_probabilities",
    "service_cdf",
    "service_pdf",
    "service_sf",
]
