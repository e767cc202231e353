"""The MIS statistic, its concentration bounds, violation attribution and tie-breaking."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Literal

import numpy as np

from .estimators import ContingencyTable, EntropyDecomposition, mle_mutual_information

Regime = Literal["undersampled", "oversampled", "auto"]
Violation = Literal["none", "below", "above"]
Dominant = Literal["input_entropy", "output_entropy", "conditional_entropy", "tie", "none"]

COMPONENTS = ("input_entropy", "output_entropy", "conditional_entropy")


@dataclass(frozen=True)
class MisConfig:
    rho: float = 0.1
    regime: Regime = "auto"
    y_cardinality: int | None = None
    x_cardinality: int | None = None
    auto_threshold_factor: float = 5.0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.regime not in ("undersampled", "oversampled", "auto"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime == "oversampled" and not self.y_cardinality:
            raise ValueError("the oversampled regime needs y_cardinality")
        if self.regime == "auto" and not (self.y_cardinality and self.x_cardinality):
            raise ValueError("auto regime needs both x_cardinality and y_cardinality")

    def resolve_regime(self, n: int) -> str:
        if self.regime != "auto":
            return self.regime
        cells = self.auto_threshold_factor * self.x_cardinality * self.y_cardinality
        return "oversampled" if n > cells else "undersampled"


@dataclass(frozen=True)
class MisReport:
    n: int
    m: int
    mis: float
    delta_h_x: float
    delta_h_y: float
    delta_h_xy: float
    delta_h_y_given_x: float
    lower: float = math.nan
    upper: float = math.nan
    violation: Violation = "none"
    dominant: Dominant = "none"
    ratios: tuple[float, float, float] = (math.nan, math.nan, math.nan)
    old: EntropyDecomposition | None = field(default=None, compare=False, repr=False)
    new: EntropyDecomposition | None = field(default=None, compare=False, repr=False)

    def as_record(self) -> dict:
        """Flat dict suitable for one CSV row."""
        d = asdict(self)
        d.pop("old"), d.pop("new")
        r = d.pop("ratios")
        d["ratio_x"], d["ratio_y"], d["ratio_ygx"] = r
        return d


@dataclass(frozen=True)
class ReactionDecision:
    kind: Literal["none", "sampling_adjust_exploit", "sampling_adjust_explore", "fork"]
    p_adjust: float
    coin_outcome: Literal["adjust", "fork", "not_tossed"]


def mis_statistic(old_table_n: ContingencyTable, combined_table_nm: ContingencyTable) -> MisReport:
    """MIS = I_{n+m} - I_n plus the entropy deltas, without bounds."""
    if old_table_n.total_n < 1:
        raise ValueError("the old table must hold at least one observation")
    if not combined_table_nm.extends(old_table_n):
        raise ValueError("the combined table must strictly extend the old table "
                         "(same shape, every count >= old, more observations)")
    a = mle_mutual_information(old_table_n)
    b = mle_mutual_information(combined_table_nm)
    n = old_table_n.total_n
    return MisReport(
        n=n,
        m=combined_table_nm.total_n - n,
        mis=b.mi - a.mi,
        delta_h_x=b.h_x - a.h_x,
        delta_h_y=b.h_y - a.h_y,
        delta_h_xy=b.h_xy - a.h_xy,
        delta_h_y_given_x=b.h_y_given_x - a.h_y_given_x,
        old=a,
        new=b,
    )


def mis_center(n: int, m: int, cfg: MisConfig) -> float:
    if cfg.resolve_regime(n) == "oversampled":
        return (cfg.y_cardinality - 1) * (1.0 / n - 1.0 / (m + n))
    return math.log(m + n) - math.log(n)


def mis_halfwidth(n, m, rho: float):
    """Concentration halfwidth; ``n`` and ``m`` may be arrays."""
    k = np.add(m, n)
    hw = np.sqrt(2.0 * np.asarray(m) * math.log(2.0 / rho)) * np.log(k) / k
    return float(hw) if np.ndim(hw) == 0 else hw


def mis_bounds(n: int, m: int, cfg: MisConfig) -> tuple[float, float]:
    """Acceptance interval for MIS under a well-regulated system, at level 1 - rho."""
    if n < 1:
        raise ValueError("need n >= 1")
    if m < 2:
        raise ValueError("the MIS bound is undefined for m < 2")
    c = mis_center(n, m, cfg)
    hw = mis_halfwidth(n, m, cfg.rho)
    return c - hw, c + hw


def attribution_ratios(report: MisReport) -> tuple[float, float, float]:
    """Signed contribution of each entropy component to the MIS direction.

    Input and output entropy enter MI with a plus sign, conditional entropy
    with a minus sign, so its ratio is negated to keep "larger = pushes MIS
    further in its own direction" for all three.
    """
    s = math.copysign(1.0, report.mis)
    a = abs(report.mis)
    return (s * report.delta_h_x / a,
            s * report.delta_h_y / a,
            -s * report.delta_h_y_given_x / a)


def _dominant(ratios) -> str:
    best = max(ratios)
    winners = [c for c, r in zip(COMPONENTS, ratios) if r == best]
    if "output_entropy" in winners:
        return "output_entropy"
    if len(winners) > 1:
        return "tie"
    return winners[0]


def classify(report: MisReport, bounds: tuple[float, float]) -> MisReport:
    lower, upper = bounds
    if report.mis < lower:
        violation = "below"
    elif report.mis > upper:
        violation = "above"
    else:
        violation = "none"
    if report.mis == 0.0:
        # a positive lower bound can exclude an exactly zero MIS (e.g. a single
        # input category on both sides); with no direction there is nothing to attribute
        return replace(report, lower=lower, upper=upper, violation=violation,
                       dominant="none", ratios=(math.nan, math.nan, math.nan))
    ratios = attribution_ratios(report)
    dominant = _dominant(ratios) if violation != "none" else "none"
    return replace(report, lower=lower, upper=upper, violation=violation,
                   dominant=dominant, ratios=ratios)


def coin_toss(delta_h_x: float, delta_h_y_given_x: float, rng: np.random.Generator,
              violation: Violation = "above") -> ReactionDecision:
    """Choose between sampling adjustment and forking with odds |dH(x)| : |dH(y|x)|.

    ``violation`` only sets the direction of an adjustment: an upper violation
    calls for more exploitation, a lower one for more exploration.
    """
    ax, ac = abs(delta_h_x), abs(delta_h_y_given_x)
    if ax + ac == 0.0:
        return ReactionDecision("none", math.nan, "not_tossed")
    p = ax / (ax + ac)
    z = rng.random() < p
    if z:
        kind = "sampling_adjust_exploit" if violation == "above" else "sampling_adjust_explore"
        return ReactionDecision(kind, p, "adjust")
    return ReactionDecision("fork", p, "fork")
