"""Report containers and the renewal-reward assembly shared by both analytic engines."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from .config import SystemConfig
from .errors import DivergenceError


@dataclass(frozen=True)
class CaseProbabilities:
    """Reception-outcome probabilities for the tracked device.

    ``p_f1``/``p_f2`` are conditional on a failed reception (K others first /
    deadline first); ``p_s1``/``p_s2`` are conditional on a successful one.
    """

    p_success: float
    p_f1: float
    p_f2: float
    p_s1: float
    p_s2: float


@dataclass(frozen=True)
class MomentSet:
    e_xf: float
    e_xf2: float
    e_xs: float
    e_xs2: float
    e_w: float
    e_w2: float
    e_m: float
    e_that: float


@dataclass(frozen=True)
class ConditionalMoments:
    """Conditional moments feeding the inter-generation mixtures.

    ``tnk_*`` are the K-th reception time given it beat the deadline.  The
    ``deadline_*`` entries only exist for the random policy and are None when
    the conditioning event is impossible (``deadline_s2_*`` when K = 1).
    """

    tnk_first: float
    tnk_second: float
    deadline_f2_first: float | None = None
    deadline_f2_second: float | None = None
    deadline_s2_first: float | None = None
    deadline_s2_second: float | None = None


@dataclass(frozen=True)
class AoiReport:
    average_aoi: float
    average_peak_aoi: float
    cases: CaseProbabilities
    moments: MomentSet
    conditionals: ConditionalMoments
    config: SystemConfig
    source: str = "analytic"
    quadrature_error: float | None = None

    @property
    def policy(self):
        return self.config.policy

    def flat(self):
        """Ordered ``name -> value`` mapping of every numeric field."""
        out = {"average_aoi": self.average_aoi, "average_peak_aoi": self.average_peak_aoi}
        for group in ("cases", "moments", "conditionals"):
            obj = getattr(self, group)
            for f in fields(obj):
                out[f"{group}.{f.name}"] = getattr(obj, f.name)
        return out

    def to_dict(self):
        return {
            "average_aoi": self.average_aoi,
            "average_peak_aoi": self.average_peak_aoi,
            "policy": self.policy,
            "source": self.source,
            "config": self.config.to_dict(),
            "cases": asdict(self.cases),
            "moments": asdict(self.moments),
            "conditionals": asdict(self.conditionals),
            "quadrature_error": self.quadrature_error,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            average_aoi=data["average_aoi"],
            average_peak_aoi=data["average_peak_aoi"],
            cases=CaseProbabilities(**data["cases"]),
            moments=MomentSet(**data["moments"]),
            conditionals=ConditionalMoments(**data["conditionals"]),
            config=SystemConfig.from_dict(data["config"]),
            source=data.get("source", "analytic"),
            quadrature_error=data.get("quadrature_error"),
        )


def wait_moments(p_success, e_xf, e_xf2):
    """Moments of the waiting time W, a geometric number (M - 1) of failed
    inter-generation times.

    Works on floats and on mpmath numbers alike.  Returns ``(E[W], E[W^2], E[M])``.
    """
    if not p_success > 0:
        raise DivergenceError("success probability is zero: the average AoI is infinite")
    if p_success > 1:
        raise ValueError(f"p_success must be <= 1, got {p_success!r}")
    e_m = 1 / p_success
    if p_success == 1:
        return 0 * e_xf, 0 * e_xf, e_m
    var_m = (1 - p_success) / p_success**2
    var_xf = e_xf2 - e_xf**2
    if var_xf < 0:
        # e_xf2 >= e_xf^2 up to rounding; clamp the rounding residue
        var_xf = 0 * var_xf
    e_w = (e_m - 1) * e_xf
    var_w = e_xf**2 * var_m + var_xf * (e_m - 1)
    return e_w, e_w**2 + var_w, e_m


def renewal_aoi(e_w, e_w2, e_xs, e_xs2, e_that):
    """(average AoI, average peak AoI) from the renewal-cycle moments."""
    num = e_w2 + 2 * (e_that + e_xs) * e_w + 2 * e_xs * e_that + e_xs2
    den = 2 * e_w + 2 * e_xs
    return num / den, e_xs + e_w + e_that


def _f(x):
    return None if x is None else float(x)


def build_report(config, *, p_success, p_f1, p_f2, p_s1, p_s2, e_xf, e_xf2, e_xs,
                 e_xs2, e_that, tnk, deadline_f2=(None, None), deadline_s2=(None, None),
                 source="analytic", quadrature_error=None):
    e_w, e_w2, e_m = wait_moments(p_success, e_xf, e_xf2)
    aoi, peak = renewal_aoi(e_w, e_w2, e_xs, e_xs2, e_that)
    # peak from the rounded parts so the renewal identity holds exactly in floats
    aoi, peak = float(aoi), float(e_xs) + float(e_w) + float(e_that)
    if not (math.isfinite(aoi) and math.isfinite(peak)):
        raise DivergenceError(f"non-finite AoI for {config}")
    return AoiReport(
        average_aoi=aoi,
        average_peak_aoi=peak,
        cases=CaseProbabilities(*(float(x) for x in (p_success, p_f1, p_f2, p_s1, p_s2))),
        moments=MomentSet(*(float(x) for x in (e_xf, e_xf2, e_xs, e_xs2, e_w, e_w2, e_m, e_that))),
        conditionals=ConditionalMoments(
            float(tnk[0]), float(tnk[1]),
            _f(deadline_f2[0]), _f(deadline_f2[1]),
            _f(deadline_s2[0]), _f(deadline_s2[1]),
        ),
        config=config,
        source=source,
        quadrature_error=quadrature_error,
    )
