"""Classical single-instance surprise measures used as baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PredictiveGaussian:
    mean: float
    variance: float

    def __post_init__(self):
        if not (self.variance > 0.0 and math.isfinite(self.variance)):
            raise ValueError(f"variance must be positive and finite, got {self.variance}")


@dataclass(frozen=True)
class SurpriseThresholds:
    # shannon is in decimal log units: 1.3 = -log10(0.05), i.e. density below 5%
    shannon: float = 1.3
    postdictive: float = 0.5

    def __post_init__(self):
        if not (math.isfinite(self.shannon) and math.isfinite(self.postdictive)):
            raise ValueError("thresholds must be finite")


def shannon_surprise(pred: PredictiveGaussian, y: float, base: float = math.e) -> float:
    """Negative log predictive density of ``y``; nats unless ``base`` says otherwise."""
    nats = 0.5 * (LOG_2PI + math.log(pred.variance) + (y - pred.mean) ** 2 / pred.variance)
    return nats if base == math.e else nats / math.log(base)


def residual_surprise(dist: Mapping | Sequence[float], outcome) -> float:
    """Gap between the observed and the smallest achievable Shannon surprise.

    ``dist`` is a mapping category -> probability or a probability sequence
    indexed by category. A zero-probability outcome returns ``inf``.
    """
    probs = dict(dist) if isinstance(dist, Mapping) else dict(enumerate(dist))
    if not probs:
        raise ValueError("empty distribution")
    vals = list(probs.values())
    if any(p < 0 for p in vals) or not math.isclose(sum(vals), 1.0, abs_tol=1e-9):
        raise ValueError("distribution must be non-negative and sum to one")
    if outcome not in probs:
        raise KeyError(f"outcome {outcome!r} not in the distribution's support")
    p = probs[outcome]
    if p == 0.0:
        return math.inf
    return max(math.log(max(vals)) - math.log(p), 0.0)


def gaussian_kl(p: PredictiveGaussian, q: PredictiveGaussian) -> float:
    """KL(p || q) for univariate Gaussians."""
    return (0.5 * math.log(q.variance / p.variance)
            + (p.variance + (p.mean - q.mean) ** 2) / (2.0 * q.variance) - 0.5)


def postdictive_surprise(prior_pred: PredictiveGaussian, post_pred: PredictiveGaussian) -> float:
    """KL(updated || old) between predictive output distributions."""
    return max(gaussian_kl(post_pred, prior_pred), 0.0)
